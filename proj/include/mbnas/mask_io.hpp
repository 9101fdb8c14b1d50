// Copyright 2026 The MBNAS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Mask and score-table files.
//
// A mask is a JSON header
//   {"shape": [H, W], "spacing": [dy, dx], "num_classes": C,
//    "dtype": "uint8" | "int32", "data": "<sidecar file>"}
// next to a raw row-major label buffer (little-endian for int32). Binary
// (P5) and ASCII (P2) PGM files load with unit spacing, gray value = label.

#ifndef MBNAS_MASK_IO_HPP_
#define MBNAS_MASK_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbnas/common.hpp"
#include "mbnas/seg_metrics.hpp"
#include "mbnas/stats.hpp"

namespace mbnas {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedMask {
  LabelMask mask;
  int num_classes = 0;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void check_labels(const LabelMask& m, int num_classes, const std::string& where) {
  for (auto v : m.labels)
    if (v < 0 || v >= num_classes)
      throw FormatError(where + ": label " + std::to_string(v) + " outside [0, " +
                        std::to_string(num_classes) + ")");
}

inline int max_label_plus_one(const LabelMask& m) {
  int top = 0;
  for (auto v : m.labels) top = std::max(top, static_cast<int>(v));
  return top + 1;
}

inline LoadedMask load_pgm(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw FormatError(p.string() + ": not a PGM file");
  auto next_int = [&]() {
    for (;;) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      int v = -1;
      if (!(in >> v)) throw FormatError(p.string() + ": truncated PGM header");
      return v;
    }
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0) throw FormatError(p.string() + ": bad PGM size");
  if (maxval <= 0 || maxval > 255) throw FormatError(p.string() + ": only 8-bit PGM is supported");
  LoadedMask out{LabelMask(h, w), 0};
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::string buf(n, '\0');
    if (!in.read(buf.data(), static_cast<std::streamsize>(n)))
      throw FormatError(p.string() + ": truncated PGM data");
    for (std::size_t i = 0; i < n; ++i)
      out.mask.labels[i] = static_cast<unsigned char>(buf[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      int v;
      if (!(in >> v)) throw FormatError(p.string() + ": truncated PGM data");
      out.mask.labels[i] = v;
    }
  }
  out.num_classes = max_label_plus_one(out.mask);
  return out;
}

}  // namespace detail

inline LoadedMask load_mask(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".PGM") return detail::load_pgm(path);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(detail::read_file(path));
    const auto shape = h.at("shape").get<std::vector<int>>();
    const auto spacing = h.at("spacing").get<std::vector<double>>();
    if (shape.size() != 2 || spacing.size() != 2)
      throw FormatError(path.string() + ": shape and spacing must have 2 entries");
    const int num_classes = h.at("num_classes").get<int>();
    const auto dtype = h.at("dtype").get<std::string>();
    const auto data = path.parent_path() / h.at("data").get<std::string>();
    LoadedMask out{LabelMask(shape[0], shape[1], spacing[0], spacing[1]), num_classes};
    const std::string raw = detail::read_file(data);
    const std::size_t n = out.mask.labels.size();
    if (dtype == "uint8") {
      if (raw.size() != n) throw FormatError(data.string() + ": expected " + std::to_string(n) + " bytes");
      for (std::size_t i = 0; i < n; ++i)
        out.mask.labels[i] = static_cast<unsigned char>(raw[i]);
    } else if (dtype == "int32") {
      if (raw.size() != 4 * n)
        throw FormatError(data.string() + ": expected " + std::to_string(4 * n) + " bytes");
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b)
          v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
        out.mask.labels[i] = static_cast<std::int32_t>(v);
      }
    } else {
      throw FormatError(path.string() + ": unsupported dtype '" + dtype + "'");
    }
    detail::check_labels(out.mask, num_classes, path.string());
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Writes `<path>` and a `<stem>.raw` sidecar next to it.
inline void save_mask(const std::filesystem::path& path, const LabelMask& m, int num_classes) {
  detail::check_labels(m, num_classes, path.string());
  const bool narrow = num_classes <= 256;
  const auto sidecar = path.stem().string() + ".raw";
  nlohmann::json h = {{"shape", {m.height, m.width}},
                      {"spacing", {m.dy, m.dx}},
                      {"num_classes", num_classes},
                      {"dtype", narrow ? "uint8" : "int32"},
                      {"data", sidecar}};
  std::string raw;
  for (auto v : m.labels) {
    if (narrow) {
      raw.push_back(static_cast<char>(v));
    } else {
      const auto u = static_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) raw.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
    }
  }
  std::ofstream(path.parent_path() / sidecar, std::ios::binary) << raw;
  std::ofstream(path) << h.dump(2) << '\n';
}

inline void save_pgm(const std::filesystem::path& path, const LabelMask& m) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << m.width << ' ' << m.height << "\n255\n";
  for (auto v : m.labels) {
    if (v < 0 || v > 255) throw FormatError("PGM labels must fit in 8 bits");
    out.put(static_cast<char>(v));
  }
}

// CSV with a header row of model names; each further row is one block.
// A leading column named "block" (or empty) is treated as a row label.
inline ScoreTable parse_score_table(const std::string& text) {
  ScoreTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true, labelled = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto cells = split(line);
    if (header) {
      labelled = !cells.empty() && (cells[0].empty() || cells[0] == "block");
      t.models.assign(cells.begin() + (labelled ? 1 : 0), cells.end());
      header = false;
      continue;
    }
    if (labelled && !cells.empty()) cells.erase(cells.begin());
    if (cells.size() != t.models.size())
      throw FormatError("score table line " + std::to_string(line_no) + ": expected " +
                        std::to_string(t.models.size()) + " values");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw FormatError("score table line " + std::to_string(line_no) + ": bad value '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.models.empty()) throw FormatError("score table has no header");
  return t;
}

inline ScoreTable load_score_table(const std::filesystem::path& p) {
  return parse_score_table(detail::read_file(p));
}

}  // namespace mbnas

#endif  // MBNAS_MASK_IO_HPP_
