#pragma once

// Built-in surface collection: closed-form examples with curated expected
// values.  Each entry is a DSL file (one or two atlas charts) plus a JSON
// sidecar holding its classification tag and the expected-value tables the
// golden tests sweep.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvelab/surface.hpp"

#ifndef CURVELAB_CATALOG_DIR
#define CURVELAB_CATALOG_DIR "catalog"
#endif

namespace curvelab {

struct CatalogEntry {
  std::string name;
  std::string tag;
  std::string description;
  bool compact = false;
  std::vector<std::string> chart_files;
  std::vector<SurfaceSpec> charts;  // parsed, same order as chart_files
  int grid_nx = 48, grid_ny = 48;   // sweep defaults
  int order = 4;
  nlohmann::json expected;          // "fields", "identities", "chi", "topology"
};

inline std::string catalog_dir() {
  if (const char* env = std::getenv("CURVELAB_CATALOG_DIR"); env != nullptr && *env)
    return env;
  return CURVELAB_CATALOG_DIR;
}

inline std::vector<std::string> list_catalog() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(catalog_dir()) / "expected";
  if (!fs::is_directory(dir))
    throw std::runtime_error("catalog directory not found: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

inline CatalogEntry get_catalog_entry(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = catalog_dir();
  const fs::path meta_path = dir / "expected" / (name + ".json");
  std::ifstream meta(meta_path);
  if (!meta)
    throw std::invalid_argument("unknown catalog entry: " + name);
  nlohmann::json j;
  meta >> j;

  CatalogEntry entry;
  entry.name = name;
  entry.tag = j.value("tag", "");
  entry.description = j.value("description", "");
  entry.compact = j.value("compact", false);
  if (j.contains("grid")) {
    entry.grid_nx = j["grid"][0].get<int>();
    entry.grid_ny = j["grid"][1].get<int>();
  }
  entry.order = j.value("order", 4);
  entry.expected = j;

  for (const auto& f : j.at("charts")) {
    const std::string fname = f.get<std::string>();
    std::ifstream src(dir / fname);
    if (!src)
      throw std::runtime_error("catalog chart file missing: " +
                               (dir / fname).string());
    std::ostringstream text;
    text << src.rdbuf();
    entry.chart_files.push_back(fname);
    entry.charts.push_back(parse_surface(text.str()));
  }
  if (entry.charts.empty())
    throw std::runtime_error("catalog entry lists no charts: " + name);
  return entry;
}

}  // namespace curvelab
