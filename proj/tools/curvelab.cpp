// Batch front-end for the curvelab library.
//
//   curvelab analyze  --catalog NAME | --spec FILE [--grid NXxNY] [--order K]
//                     [--out DIR] [--format json,csv]
//   curvelab check    --catalog NAME | --spec FILE [--id ID[,ID...]] [...]
//   curvelab deform   --catalog NAME | --spec FILE --a LIST --theta LIST [...]
//   curvelab compare  A.surface B.surface [--out DIR]
//   curvelab catalog  [--format json]
//
// Exit codes are a stable contract for scripting: 0 everything passed,
// 1 a verification failed, 2 usage or parse error, 3 numeric failure.
// All report files are written atomically (temporary file plus rename).
// Plot output is data only: CSV fields plus a gnuplot script, no rendering
// dependency.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "curvelab/catalog.hpp"
#include "curvelab/deform.hpp"
#include "curvelab/grid.hpp"
#include "curvelab/identities.hpp"
#include "curvelab/surface.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void atomic_write(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct RunConfig {
  std::string catalog_name;
  std::string spec_path;
  std::string grid_text;
  int order = 4;
  std::string out_dir = ".";
  std::string format_text = "json";
  std::vector<std::string> ids;
  std::string a_text;
  std::string theta_text;
  std::string catalog_format = "text";

  int nx = 64, ny = 64;
  bool want_json = true, want_csv = false;
};

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " list is empty");
  return out;
}

void finalize_config(RunConfig& cfg) {
  if (!cfg.grid_text.empty()) {
    const auto sep = cfg.grid_text.find('x');
    try {
      if (sep == std::string::npos) throw std::invalid_argument(cfg.grid_text);
      cfg.nx = std::stoi(cfg.grid_text.substr(0, sep));
      cfg.ny = std::stoi(cfg.grid_text.substr(sep + 1));
    } catch (const std::exception&) {
      throw UsageError("--grid expects NXxNY, got '" + cfg.grid_text + "'");
    }
  }
  if (cfg.nx < 8 || cfg.ny < 8) throw UsageError("grid must be at least 8x8");
  if (cfg.order < 3 || cfg.order > 10) throw UsageError("jet order must lie in [3, 10]");

  cfg.want_json = cfg.want_csv = false;
  std::stringstream ss(cfg.format_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "json")
      cfg.want_json = true;
    else if (item == "csv")
      cfg.want_csv = true;
    else if (item != "text")
      throw UsageError("unknown format '" + item + "' (expected json and/or csv)");
  }
  if (!cfg.want_json && !cfg.want_csv) cfg.want_json = true;
}

// Resolves the surface source: a catalog entry or a spec file.
std::pair<curvelab::SurfaceSpec, std::string> resolve_surface(const RunConfig& cfg) {
  if (!cfg.catalog_name.empty() && !cfg.spec_path.empty())
    throw UsageError("give either --catalog or --spec, not both");
  if (!cfg.catalog_name.empty()) {
    const curvelab::CatalogEntry entry = curvelab::get_catalog_entry(cfg.catalog_name);
    return {entry.charts.front(), entry.name};
  }
  if (!cfg.spec_path.empty()) {
    std::ifstream in(cfg.spec_path);
    if (!in) throw UsageError("cannot open spec file " + cfg.spec_path);
    std::ostringstream text;
    text << in.rdbuf();
    return {curvelab::parse_surface(text.str()), fs::path(cfg.spec_path).stem().string()};
  }
  throw UsageError("no surface given; use --catalog NAME or --spec FILE");
}

struct Range {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  int count = 0;
  void add(double v) {
    if (!std::isfinite(v)) return;
    min = std::min(min, v);
    max = std::max(max, v);
    ++count;
  }
  json to_json() const {
    if (count == 0) return json{{"count", 0}};
    return json{{"min", min}, {"max", max}, {"count", count}};
  }
};

void write_field_csv(const fs::path& path, const curvelab::Grid& g,
                     const std::vector<double>& values, const std::vector<char>& valid) {
  std::ostringstream out;
  out.precision(12);
  out << "# x,y,value\n";
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(g.index(i, j));
      if (!valid[k]) continue;
      out << g.x(i) << ',' << g.y(j) << ',' << values[k] << '\n';
    }
    out << '\n';  // gnuplot grid separator
  }
  atomic_write(path, out.str());
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const RunConfig& cfg) {
  const auto [spec, name] = resolve_surface(cfg);
  const curvelab::Grid grid = curvelab::make_grid(spec, cfg.nx, cfg.ny);
  const curvelab::GridAnalysis a = curvelab::analyze_grid(spec, grid, cfg.order);

  json inv;
  inv["surface"] = name;
  inv["dim"] = spec.dim;
  inv["grid"] = {{"nx", grid.nx},
                 {"ny", grid.ny},
                 {"periodic_x", grid.periodic_x},
                 {"periodic_y", grid.periodic_y}};
  inv["order"] = cfg.order;

  Range K, F, conf, minres, phres;
  int immersed = 0, regular = 0, conformal = 0, minimal = 0;
  std::map<int, int> tau_votes;
  const int levels =
      a.nodes.empty() ? 0 : static_cast<int>(a.nodes.front().levels.size());
  std::vector<Range> kappa(levels), mu(levels), kperp(levels), ecc(levels), hopf(levels);
  std::vector<int> iso_nodes(levels, 0), level_nodes(levels, 0);

  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    const curvelab::FlagReport& r = a.nodes[k];
    if (!r.immersed) continue;
    ++immersed;
    if (r.regular) ++regular;
    if (r.conformal) ++conformal;
    if (r.minimal) ++minimal;
    ++tau_votes[r.tau];
    K.add(r.K);
    F.add(r.F);
    conf.add(r.conf_res);
    minres.add(r.min_res);
    phres.add(a.ph_res[k]);
    for (int l = 0; l < levels && l < static_cast<int>(r.levels.size()); ++l) {
      const curvelab::EllipseData& e = r.levels[static_cast<std::size_t>(l)];
      if (e.beyond_flag) continue;
      ++level_nodes[static_cast<std::size_t>(l)];
      kappa[static_cast<std::size_t>(l)].add(e.kappa);
      mu[static_cast<std::size_t>(l)].add(e.mu);
      kperp[static_cast<std::size_t>(l)].add(e.kperp);
      ecc[static_cast<std::size_t>(l)].add(e.eccentricity);
      hopf[static_cast<std::size_t>(l)].add(std::abs(e.hopf));
      const double scale = std::max(e.kappa * e.kappa + e.mu * e.mu, 1e-300);
      if (std::abs(e.iso_hopf) <= 1e-6 * scale) ++iso_nodes[static_cast<std::size_t>(l)];
    }
  }

  inv["nodes"] = grid.size();
  inv["immersed"] = immersed;
  inv["regular"] = regular;
  inv["conformal"] = conformal;
  inv["minimal"] = minimal;
  inv["K"] = K.to_json();
  inv["F"] = F.to_json();
  inv["sup"] = {{"conf_res", conf.count ? conf.max : 0.0},
                {"min_res", minres.count ? minres.max : 0.0},
                {"ph_res", phres.count ? phres.max : 0.0}};
  int tau_mode = 0, best = -1;
  for (const auto& [t, n] : tau_votes)
    if (n > best) {
      best = n;
      tau_mode = t;
    }
  inv["tau"] = tau_mode;

  json jlevels = json::array();
  int iso_prefix = 0, data_levels = 0;
  bool prefix_open = true;
  for (int l = 0; l < levels; ++l) {
    const std::size_t ll = static_cast<std::size_t>(l);
    if (level_nodes[ll] == 0) continue;  // past the flag everywhere
    data_levels = l + 1;
    const bool isotropic = iso_nodes[ll] == level_nodes[ll];
    if (prefix_open && isotropic)
      ++iso_prefix;
    else
      prefix_open = false;
    jlevels.push_back({{"level", l + 1},
                       {"nodes", level_nodes[ll]},
                       {"kappa", kappa[ll].to_json()},
                       {"mu", mu[ll].to_json()},
                       {"kperp", kperp[ll].to_json()},
                       {"eccentricity", ecc[ll].to_json()},
                       {"hopf_abs_max", hopf[ll].count ? hopf[ll].max : 0.0},
                       {"isotropic", isotropic}});
  }
  inv["levels"] = jlevels;

  // Classification via the circle criterion at each ellipse level: the
  // three equivalent isotropy tests agree, so one proxy decides.
  std::string cls;
  if (immersed == 0)
    cls = "degenerate";
  else if (data_levels == 0)
    cls = "totally geodesic";
  else if (iso_prefix >= data_levels)
    cls = "isotropic";
  else if (iso_prefix > 0)
    cls = std::to_string(iso_prefix) + "-isotropic";
  else
    cls = "non-isotropic";
  inv["classification"] = cls;

  const fs::path out(cfg.out_dir);
  if (cfg.want_json) atomic_write(out / "invariants.json", inv.dump(2) + "\n");

  if (cfg.want_csv) {
    const fs::path fields = out / "fields";
    std::vector<std::string> names;
    const auto emit = [&](const std::string& fname, auto&& getter) {
      std::vector<double> vals(static_cast<std::size_t>(grid.size()), 0.0);
      std::vector<char> ok(static_cast<std::size_t>(grid.size()), 0);
      for (std::size_t k = 0; k < a.nodes.size(); ++k) {
        const std::optional<double> v = getter(a.nodes[k]);
        if (!v.has_value() || !std::isfinite(*v)) continue;
        vals[k] = *v;
        ok[k] = 1;
      }
      write_field_csv(fields / (fname + ".csv"), grid, vals, ok);
      names.push_back(fname);
    };
    using R = const curvelab::FlagReport&;
    emit("F", [](R r) { return r.immersed ? std::optional<double>(r.F) : std::nullopt; });
    emit("K", [](R r) { return r.immersed ? std::optional<double>(r.K) : std::nullopt; });
    emit("conf_res",
         [](R r) { return r.immersed ? std::optional<double>(r.conf_res) : std::nullopt; });
    emit("min_res",
         [](R r) { return r.immersed ? std::optional<double>(r.min_res) : std::nullopt; });
    for (int l = 0; l < levels; ++l) {
      if (level_nodes[static_cast<std::size_t>(l)] == 0) continue;
      const auto lvl = [l](R r) -> const curvelab::EllipseData* {
        if (!r.immersed || l >= static_cast<int>(r.levels.size())) return nullptr;
        const auto& e = r.levels[static_cast<std::size_t>(l)];
        return e.beyond_flag ? nullptr : &e;
      };
      const std::string suffix = "_" + std::to_string(l + 1);
      emit("kappa" + suffix, [&](R r) {
        const auto* e = lvl(r);
        return e ? std::optional<double>(e->kappa) : std::nullopt;
      });
      emit("mu" + suffix, [&](R r) {
        const auto* e = lvl(r);
        return e ? std::optional<double>(e->mu) : std::nullopt;
      });
      emit("kperp" + suffix, [&](R r) {
        const auto* e = lvl(r);
        return e ? std::optional<double>(e->kperp) : std::nullopt;
      });
      emit("hopf_abs" + suffix, [&](R r) {
        const auto* e = lvl(r);
        return e ? std::optional<double>(std::abs(e->hopf)) : std::nullopt;
      });
    }
    std::ostringstream gp;
    gp << "# Render the sampled fields: gnuplot -p plot.gp\n"
       << "set datafile separator comma\n"
       << "set pm3d map\nset xlabel 'x'\nset ylabel 'y'\n";
    for (const auto& n : names)
      gp << "set title '" << n << "'\nsplot '" << n
         << ".csv' using 1:2:3 with pm3d notitle\npause -1\n";
    atomic_write(fields / "plot.gp", gp.str());
  }

  std::cout << name << ": " << cls << ", " << immersed << "/" << grid.size()
            << " immersed nodes";
  if (K.count) std::cout << ", K in [" << K.min << ", " << K.max << "]";
  std::cout << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& cfg) {
  const auto [spec, name] = resolve_surface(cfg);
  const curvelab::Grid grid = curvelab::make_grid(spec, cfg.nx, cfg.ny);
  const curvelab::GridAnalysis a = curvelab::analyze_grid(spec, grid, cfg.order);
  const curvelab::IdentityInputs inputs = curvelab::make_identity_inputs(a);

  std::vector<std::string> ids;
  for (const auto& entry : cfg.ids) {
    std::stringstream ss(entry);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) ids.push_back(item);
  }
  const bool explicit_ids = !ids.empty();

  std::vector<curvelab::CheckReport> reports;
  if (explicit_ids) {
    for (const auto& id : ids) reports.push_back(curvelab::check_identity(inputs, id));
  } else {
    reports = curvelab::check_all(inputs);
  }

  json out = json::array();
  bool any_failed = false;
  for (const auto& r : reports) {
    json jr;
    jr["id"] = r.id;
    jr["applicable"] = r.applicable;
    jr["passed"] = r.passed;
    if (std::isfinite(r.sup_residual)) jr["sup_residual"] = r.sup_residual;
    jr["tolerance"] = r.tolerance;
    jr["nodes_checked"] = r.nodes_checked;
    jr["nodes_failed"] = r.nodes_failed;
    jr["detail"] = r.detail;
    out.push_back(jr);
    // A requested check that cannot run counts as a failure; an
    // inapplicable check from the default sweep is just skipped.
    const bool failed = !r.passed && (r.applicable || explicit_ids);
    any_failed = any_failed || failed;
    std::cout << (r.passed ? "pass " : (r.applicable ? "FAIL " : "skip ")) << r.id << ": "
              << r.detail << "\n";
  }
  if (cfg.want_json)
    atomic_write(fs::path(cfg.out_dir) / "check.json",
                 json{{"surface", name}, {"checks", out}}.dump(2) + "\n");
  return any_failed ? kCheckFailed : kOk;
}

// ---------------------------------------------------------------------------
// deform
// ---------------------------------------------------------------------------

int cmd_deform(const RunConfig& cfg) {
  const auto [spec, name] = resolve_surface(cfg);
  if (cfg.a_text.empty() || cfg.theta_text.empty())
    throw UsageError("deform needs --a and --theta lists");
  curvelab::DeformationSpec dspec;
  try {
    dspec = curvelab::DeformationSpec::make(parse_double_list(cfg.a_text, "--a"),
                                            parse_double_list(cfg.theta_text, "--theta"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const curvelab::Grid patch = curvelab::open_patch(spec, cfg.nx, cfg.ny);
  curvelab::FamilyOptions fopt;
  fopt.substeps = 16;

  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  json members = json::array();
  std::vector<curvelab::SampledSurface> pieces;
  for (int j = 0; j < dspec.m; ++j) {
    const double theta = dspec.angles[static_cast<std::size_t>(j)];
    const curvelab::FamilyResult r = curvelab::associated_family(spec, theta, patch, fopt);
    const std::string fname = "family_" + std::to_string(j) + ".surface";
    curvelab::save_surface(r.surface, (out / fname).string());
    members.push_back({{"theta", theta},
                       {"file", fname},
                       {"compatibility", r.compatibility},
                       {"frame_drift", r.frame_drift},
                       {"conformal_deviation", r.conformal_deviation},
                       {"hopf_deviation", r.hopf_deviation},
                       {"path_consistency", r.path_consistency}});
    pieces.push_back(std::move(r.surface));
  }

  const curvelab::SampledSurface sum = curvelab::direct_sum(pieces, dspec.weights);
  curvelab::save_surface(sum, (out / "sum.surface").string());

  const curvelab::SampledSurface source = curvelab::sample_surface(spec, patch);
  const double iso = curvelab::isometry_residual(sum, source);
  const double minres = curvelab::minimality_residual(sum);
  const int sdim = curvelab::substantial_dimension(sum);

  json rep;
  rep["surface"] = name;
  rep["weights"] = dspec.weights;
  rep["angles"] = dspec.angles;
  rep["substantial_weights"] = dspec.substantial;
  rep["members"] = members;
  rep["sum"] = {{"file", "sum.surface"},
                {"dim", sum.dim},
                {"isometry_residual", iso},
                {"minimality_residual", minres},
                {"substantial_dimension", sdim}};
  if (cfg.want_json) atomic_write(out / "deform.json", rep.dump(2) + "\n");

  std::cout << "deformed " << name << " into S^" << (sum.dim - 1) << ": isometry " << iso
            << ", minimality " << minres << ", substantial dimension " << sdim << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const RunConfig& cfg) {
  curvelab::SampledSurface a, b;
  try {
    a = curvelab::load_surface(path_a);
    b = curvelab::load_surface(path_b);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  curvelab::CongruenceResult r;
  try {
    r = curvelab::congruence(a, b);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());  // grid or dimension mismatch
  }

  json rep;
  rep["a"] = path_a;
  rep["b"] = path_b;
  rep["residual"] = r.residual;
  rep["threshold"] = r.threshold;
  rep["congruent"] = r.congruent;
  rep["degenerate"] = r.degenerate;
  json q = json::array();
  for (int i = 0; i < r.rotation.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < r.rotation.cols(); ++j) row.push_back(r.rotation(i, j));
    q.push_back(row);
  }
  rep["rotation"] = q;
  if (cfg.want_json)
    atomic_write(fs::path(cfg.out_dir) / "compare.json", rep.dump(2) + "\n");

  std::cout << (r.congruent ? "congruent" : "not congruent") << ": residual " << r.residual
            << " against threshold " << r.threshold << (r.degenerate ? " (degenerate)" : "")
            << "\n";
  return r.congruent ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

int cmd_catalog(const RunConfig& cfg) {
  std::vector<curvelab::CatalogEntry> entries;
  for (const auto& name : curvelab::list_catalog())
    entries.push_back(curvelab::get_catalog_entry(name));
  if (cfg.catalog_format == "json") {
    json out = json::array();
    for (const auto& e : entries)
      out.push_back({{"name", e.name},
                     {"dim", e.charts.front().dim},
                     {"tag", e.tag},
                     {"description", e.description}});
    std::cout << out.dump(2) << "\n";
    return kOk;
  }
  if (cfg.catalog_format != "text")
    throw UsageError("catalog format must be text or json");
  for (const auto& e : entries)
    std::printf("%-18s dim %-2d  %s\n", e.name.c_str(), e.charts.front().dim,
                e.description.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moving-frames laboratory for surfaces in spheres"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string compare_a, compare_b;

  const auto add_common = [&](CLI::App* sub, bool surface_input) {
    if (surface_input) {
      sub->add_option("--catalog", cfg.catalog_name, "built-in surface name");
      sub->add_option("--spec", cfg.spec_path, "surface definition file");
      sub->add_option("input", cfg.spec_path, "surface definition file");
    }
    sub->add_option("--grid", cfg.grid_text, "sampling grid, NXxNY (default 64x64)");
    sub->add_option("--order", cfg.order, "jet order (default 4)");
    sub->add_option("--out", cfg.out_dir, "output directory (default .)");
    sub->add_option("--format", cfg.format_text, "output formats: json,csv");
  };

  CLI::App* analyze = app.add_subcommand("analyze", "sample a surface and report invariants");
  add_common(analyze, true);
  CLI::App* check = app.add_subcommand("check", "run structure-equation identity checks");
  add_common(check, true);
  check->add_option("--id", cfg.ids, "check ids, comma separated (default: all)");
  CLI::App* deform = app.add_subcommand("deform", "build an isometric deformation");
  add_common(deform, true);
  deform->add_option("--a", cfg.a_text, "weights, comma separated, unit square sum");
  deform->add_option("--theta", cfg.theta_text,
                     "angles in [0, pi), comma separated, strictly increasing");
  CLI::App* compare = app.add_subcommand("compare", "test two surface files for congruence");
  compare->add_option("a", compare_a, "first surface file")->required();
  compare->add_option("b", compare_b, "second surface file")->required();
  compare->add_option("--out", cfg.out_dir, "output directory (default .)");
  CLI::App* catalog = app.add_subcommand("catalog", "list built-in surfaces");
  catalog->add_option("--format", cfg.catalog_format, "output format: text or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    finalize_config(cfg);
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (check->parsed()) return cmd_check(cfg);
    if (deform->parsed()) return cmd_deform(cfg);
    if (compare->parsed()) return cmd_compare(compare_a, compare_b, cfg);
    if (catalog->parsed()) return cmd_catalog(cfg);
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const curvelab::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const curvelab::EvalError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}
