#pragma once

// Per-worker CSV files and the dataset manifest.
//
// A dataset directory holds worker_000.csv, worker_001.csv, ... (header
// f0,...,f{d-1},label; one sample per row; labels -1 or +1) and a
// manifest.json with the generator spec, the file list and SHA-256 sums.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compofed/datagen.hpp"
#include "compofed/objective.hpp"

namespace compofed {

namespace fs = std::filesystem;

namespace detail {

inline std::string to_hex(const unsigned char* data, unsigned len) {
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned k = 0; k < len; ++k) out << std::setw(2) << static_cast<int>(data[k]);
  return out.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialisation failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_, data, len); }

  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_, digest, &len);
    return to_hex(digest, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token, const fs::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(path.string() + ":" + std::to_string(line) + ": not a number: '" + token + "'");
  }
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  detail::Sha256 hash;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    hash.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return hash.hex();
}

/// SHA-256 over the in-memory doubles of every worker (features row-major,
/// then labels), in worker order.
inline std::string data_checksum(const std::vector<WorkerDataset>& workers) {
  detail::Sha256 hash;
  for (const auto& ds : workers) {
    hash.update(ds.features.data(), sizeof(double) * static_cast<std::size_t>(ds.features.size()));
    hash.update(ds.labels.data(), sizeof(double) * static_cast<std::size_t>(ds.labels.size()));
  }
  return hash.hex();
}

inline void write_worker_csv(const fs::path& path, const WorkerDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  for (Eigen::Index l = 0; l < ds.samples(); ++l) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << detail::format_double(ds.features(l, j)) << ',';
    out << (ds.labels(l) > 0 ? "1" : "-1") << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

inline WorkerDataset read_worker_csv(const fs::path& path, std::size_t worker_id) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  const auto header = detail::split_csv(line);
  require(header.size() >= 2 && header.back() == "label",
          path.string() + ": header must be f0,...,f{d-1},label");
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    require(header[j] == "f" + std::to_string(j), path.string() + ": unexpected header column '" + header[j] + "'");
  }
  std::vector<double> values;
  std::vector<double> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    require(cells.size() == d + 1, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                       std::to_string(d + 1) + " columns, got " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < d; ++j) {
      const double v = detail::parse_double(cells[j], path, line_no);
      require(std::isfinite(v), path.string() + ":" + std::to_string(line_no) + ": non-finite feature");
      values.push_back(v);
    }
    const double label = detail::parse_double(cells[d], path, line_no);
    require(label == 1.0 || label == -1.0,
            path.string() + ":" + std::to_string(line_no) + ": label must be -1 or +1, got " + cells[d]);
    labels.push_back(label);
  }
  require(!labels.empty(), path.string() + ": no samples");
  WorkerDataset ds;
  ds.worker_id = worker_id;
  const auto m = static_cast<Eigen::Index>(labels.size());
  ds.features = Eigen::Map<const RowMatrix>(values.data(), m, static_cast<Eigen::Index>(d));
  ds.labels = Eigen::Map<const Vector>(labels.data(), m);
  return ds;
}

inline std::string worker_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "worker_%03zu.csv", i);
  return buf;
}

inline nlohmann::json to_json(const GenSpec& spec) {
  return {{"alpha", spec.alpha}, {"beta", spec.beta}, {"n", spec.n},         {"m", spec.m},
          {"d", spec.d},         {"seed", spec.seed}, {"normalize", spec.normalize}};
}

/// Writes one CSV per worker plus manifest.json into `dir` (created if needed).
inline nlohmann::json write_dataset_dir(const fs::path& dir, const std::vector<WorkerDataset>& workers,
                                        const std::optional<GenSpec>& spec = std::nullopt) {
  require(!workers.empty(), "no workers to write");
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["spec"] = spec ? to_json(*spec) : nlohmann::json(nullptr);
  manifest["dim"] = workers.front().dim();
  manifest["files"] = nlohmann::json::array();
  for (std::size_t i = 0; i < workers.size(); ++i) {
    const auto name = worker_file_name(i);
    write_worker_csv(dir / name, workers[i]);
    manifest["files"].push_back({{"name", name}, {"samples", workers[i].samples()}, {"sha256", sha256_file(dir / name)}});
  }
  manifest["data_sha256"] = data_checksum(workers);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  return manifest;
}

/// Loads a dataset directory. With a manifest the listed files are read and
/// their checksums verified; otherwise every worker_*.csv is read in name order.
inline std::vector<WorkerDataset> load_dataset_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  std::vector<std::string> sums;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    try {
      in >> manifest;
      for (const auto& f : manifest.at("files")) {
        files.push_back(dir / f.at("name").get<std::string>());
        sums.push_back(f.value("sha256", ""));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("worker_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw Error("no worker files in dataset directory " + dir.string());
  std::vector<WorkerDataset> workers;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!sums.empty() && !sums[i].empty()) {
      require(sha256_file(files[i]) == sums[i], "checksum mismatch for " + files[i].string());
    }
    workers.push_back(read_worker_csv(files[i], i));
  }
  const Eigen::Index d = workers.front().dim();
  for (const auto& ds : workers) {
    require(ds.dim() == d, "dimension mismatch: " + files[ds.worker_id].string() + " has " +
                               std::to_string(ds.dim()) + " features, expected " + std::to_string(d));
  }
  return workers;
}

}  // namespace compofed
