#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace fracmag::cli {

std::string sha256_hex(const std::string& data);

/// Records what a command did: inputs, tolerances, outputs and stage timings.
class RunManifest {
 public:
  RunManifest(std::string command, const std::string& scenario_source, std::filesystem::path out_dir);

  void output(const std::filesystem::path& path);
  nlohmann::json& tolerances() { return tolerances_; }
  nlohmann::json& summary() { return summary_; }
  void write() const;

  /// Times a stage; the elapsed wall-clock seconds are stored under `name`.
  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings_.emplace_back(name, seconds_since(t0));
    } else {
      auto result = f();
      timings_.emplace_back(name, seconds_since(t0));
      return result;
    }
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0);

  std::string command_;
  std::string hash_;
  std::filesystem::path out_dir_;
  std::vector<std::string> outputs_;
  std::vector<std::pair<std::string, double>> timings_;
  nlohmann::json tolerances_ = nlohmann::json::object();
  nlohmann::json summary_ = nlohmann::json::object();
};

}  // namespace fracmag::cli
