#include "manifest.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "fracmag/io.hpp"
#include "fracmag/version.hpp"

namespace fracmag::cli {

std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

RunManifest::RunManifest(std::string command, const std::string& scenario_source, std::filesystem::path out_dir)
    : command_(std::move(command)), hash_(sha256_hex(scenario_source)), out_dir_(std::move(out_dir)) {}

void RunManifest::output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

double RunManifest::seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void RunManifest::write() const {
  nlohmann::json j;
  j["command"] = command_;
  j["tool_version"] = version_string();
  j["scenario_sha256"] = hash_;
  j["tolerances"] = tolerances_;
  j["outputs"] = outputs_;
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [name, sec] : timings_) t[name] = sec;
  j["timings_seconds"] = t;
  j["summary"] = summary_;
  write_text(out_dir_ / "manifest.json", j.dump(2) + "\n");
}

}  // namespace fracmag::cli
