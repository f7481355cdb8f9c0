// Command-line driver; talks to the library only through the C API.
#include "surfnet/surfnet.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

struct Options {
  std::map<std::string, std::optional<double>> numbers;
  std::map<std::string, std::optional<std::string>> strings;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, bool> flags;
  std::string config_file;
  std::vector<std::string> sets;
};

// Registers an option on the subcommand; the config key is the flag name
// with dashes turned into underscores.
std::string key_of(const std::string& flag) {
  std::string k = flag.substr(2);
  for (char& ch : k)
    if (ch == '-') ch = '_';
  return k;
}

void number(CLI::App* app, Options& o, const std::string& flag, const std::string& help) {
  app->add_option(flag, o.numbers[key_of(flag)], help);
}
void text(CLI::App* app, Options& o, const std::string& flag, const std::string& help) {
  app->add_option(flag, o.strings[key_of(flag)], help);
}
void list(CLI::App* app, Options& o, const std::string& flag, const std::string& help) {
  app->add_option(flag, o.lists[key_of(flag)], help);
}
void flag(CLI::App* app, Options& o, const std::string& name, const std::string& help) {
  app->add_flag(name, o.flags[key_of(name)], help);
}

json build_config(const Options& o) {
  json cfg = json::object();
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    if (!in) throw CLI::ValidationError("--config", "cannot read " + o.config_file);
    cfg = json::parse(in);
  }
  for (const auto& [k, v] : o.numbers)
    if (v) {
      const double d = *v;
      if (d == static_cast<double>(static_cast<long long>(d)) && k != "lr" && k != "threshold" && k != "noise" &&
          k != "azimuth" && k != "elevation" && k != "from_azimuth" && k != "to_azimuth" && k != "azimuth_step")
        cfg[k] = static_cast<long long>(d);
      else
        cfg[k] = d;
    }
  for (const auto& [k, v] : o.strings)
    if (v) cfg[k] = *v;
  for (const auto& [k, v] : o.lists)
    if (!v.empty()) {
      if (k == "shapes") {
        json arr = json::array();
        for (const auto& s : v) arr.push_back(std::stoi(s));
        cfg[k] = arr;
      } else {
        cfg[k] = v;
      }
    }
  for (const auto& [k, v] : o.flags)
    if (v) cfg[k] = true;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got " + s);
    const std::string value = s.substr(eq + 1);
    try {
      cfg[s.substr(0, eq)] = json::parse(value);
    } catch (const json::exception&) {
      cfg[s.substr(0, eq)] = value;
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-image surface generation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sn_version());

  char* names = nullptr;
  if (sn_stage_names(&names) != SN_OK) {
    std::fprintf(stderr, "%s\n", sn_last_error());
    return 2;
  }
  std::vector<std::string> stages;
  {
    std::string all = names, cur;
    sn_string_free(names);
    for (char ch : all + " ") {
      if (ch == ' ') {
        if (!cur.empty()) stages.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }

  std::map<std::string, Options> options;
  const std::map<std::string, std::string> about = {
      {"gen-dataset", "synthesize the superellipsoid family and write the dataset"},
      {"preprocess", "voxelize, extract a closed surface and smooth an input mesh"},
      {"parametrize", "authalic spherical parametrization of a genus-0 mesh"},
      {"encode", "geometry image (positions and curvature) of a mesh"},
      {"cluster", "D2 descriptors and spectral clustering; picks the base shape"},
      {"correspond", "base-to-mesh correspondence, consistent geometry image and filtering"},
      {"train-img", "train the depth-image to geometry-image networks"},
      {"train-param", "train the parameter to residual geometry-image networks"},
      {"generate", "generate a surface from a class code and view"},
      {"interpolate", "decode linear blends between two class codes"},
      {"export", "write a geometry image as an OBJ mesh or point cloud"},
      {"rectify", "correspondence read back from the image network's prediction"}};
  for (const auto& stage : stages) {
    const auto it = about.find(stage);
    CLI::App* sub = app.add_subcommand(stage, it == about.end() ? stage : it->second);
    Options& o = options[stage];
    text(sub, o, "--out", "workspace directory");
    number(sub, o, "--seed", "seed for every random choice");
    number(sub, o, "--resolution", "voxel grid (preprocess) or depth image size");
    number(sub, o, "--gim-res", "geometry image size");
    number(sub, o, "--threshold", "reconstruction error threshold");
    number(sub, o, "--epochs", "training epochs");
    number(sub, o, "--lr", "initial learning rate");
    number(sub, o, "--batch", "minibatch size");
    flag(sub, o, "--paper-depth", "build full-depth networks and report their shapes only");
    flag(sub, o, "--force", "re-run even if the stage is up to date");
    text(sub, o, "--input", "input mesh or geometry image");
    list(sub, o, "--inputs", "input meshes");
    text(sub, o, "--sphere", "sphere parametrization of the input");
    text(sub, o, "--base", "base mesh");
    text(sub, o, "--base-sphere", "sphere parametrization of the base mesh");
    list(sub, o, "--auxiliaries", "auxiliary meshes for indirect maps");
    number(sub, o, "--k", "cluster count");
    text(sub, o, "--dataset", "dataset directory");
    text(sub, o, "--model", "model directory");
    number(sub, o, "--class", "class index");
    number(sub, o, "--azimuth", "azimuth, degrees");
    number(sub, o, "--elevation", "elevation, degrees");
    number(sub, o, "--azimuths", "number of training azimuths");
    number(sub, o, "--azimuth-step", "spacing of training azimuths, degrees");
    number(sub, o, "--from", "first class index");
    number(sub, o, "--to", "second class index");
    number(sub, o, "--from-azimuth", "azimuth of the first code");
    number(sub, o, "--to-azimuth", "azimuth of the second code");
    number(sub, o, "--steps", "interpolation steps");
    text(sub, o, "--mode", "mesh or points");
    text(sub, o, "--loss", "curvature-weighted or plain");
    number(sub, o, "--shape", "shape index");
    list(sub, o, "--shapes", "shape indices");
    number(sub, o, "--noise", "correspondence noise, fraction of the bounding-box diagonal");
    flag(sub, o, "--zero-residual", "skip the networks and emit the rotated base");
    number(sub, o, "--max-iters", "parametrization iteration cap");
    number(sub, o, "--workers", "worker threads for per-sample work (0: one per hardware thread)");
    sub->add_option("--config", o.config_file, "JSON file of stage options");
    sub->add_option("--set", o.sets, "extra option as key=json");
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& stage : stages) {
    CLI::App* sub = app.get_subcommand(stage);
    if (!sub->parsed()) continue;
    json cfg;
    try {
      cfg = build_config(options[stage]);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "%s: %s\n", stage.c_str(), e.what());
      return 2;
    }
    char* summary = nullptr;
    const sn_status st = sn_run_stage(stage.c_str(), cfg.dump().c_str(), &summary);
    if (summary) {
      std::printf("%s\n", summary);
      sn_string_free(summary);
    }
    if (st != SN_OK) {
      std::fprintf(stderr, "%s failed (%s): %s\n", stage.c_str(), sn_status_name(st), sn_last_error());
      return 1;
    }
  }
  return 0;
}
