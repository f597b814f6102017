//
// Copyright 2026 The DPDM Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "run_io.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace dpdm::cli {

std::string Sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialization failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  }
  return hex.str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::filesystem::path OutputRoot() {
  const char* env = std::getenv(kOutputRootEnv);
  if (env != nullptr && *env != '\0') return env;
  return "runs";
}

std::filesystem::path ResolveOutputDir(const std::string& requested,
                                       const std::string& fallback) {
  if (requested.empty()) return OutputRoot() / fallback;
  const std::filesystem::path p(requested);
  return p.is_absolute() ? p : OutputRoot() / p;
}

void OutputFiles::Add(std::string role, std::filesystem::path path) {
  files_.emplace_back(std::move(role), std::move(path));
}

nlohmann::ordered_json OutputFiles::ToJson() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [role, path] : files_) {
    j[role] = {{"path", path.filename().string()}, {"sha256", Sha256File(path)}};
  }
  return j;
}

namespace {

constexpr int kSize = 520;
constexpr int kMargin = 40;

std::string Num(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

}  // namespace

std::string ScatterSvg(std::span<const Point2> points, const GmmSpec& spec) {
  double extent = 0.0;
  for (const Point2& m : spec.means) {
    extent = std::max({extent, std::abs(m.x), std::abs(m.y)});
  }
  extent = extent + 6.0 * spec.component_std + 0.1;
  const double inner = kSize - 2 * kMargin;
  auto px = [&](double v) { return kMargin + (v + extent) / (2 * extent) * inner; };
  auto py = [&](double v) { return kMargin + (extent - v) / (2 * extent) * inner; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
    << kSize << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << inner
    << "\" height=\"" << inner << "\" fill=\"none\" stroke=\"#888\"/>\n"
    << "<g fill=\"#1f5fa8\" fill-opacity=\"0.25\">\n";
  for (const Point2& p : points) {
    if (!p.IsFinite() || std::abs(p.x) > extent || std::abs(p.y) > extent) continue;
    s << "<circle cx=\"" << Num(px(p.x)) << "\" cy=\"" << Num(py(p.y)) << "\" r=\"1\"/>\n";
  }
  s << "</g>\n<g stroke=\"#c0392b\" stroke-width=\"1.5\">\n";
  for (const Point2& m : spec.means) {
    const double cx = px(m.x), cy = py(m.y);
    s << "<line x1=\"" << Num(cx - 5) << "\" y1=\"" << Num(cy) << "\" x2=\"" << Num(cx + 5)
      << "\" y2=\"" << Num(cy) << "\"/><line x1=\"" << Num(cx) << "\" y1=\"" << Num(cy - 5)
      << "\" x2=\"" << Num(cx) << "\" y2=\"" << Num(cy + 5) << "\"/>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

std::string LogLogSvg(std::span<const double> x, std::span<const double> y,
                      std::string_view x_label, std::string_view y_label) {
  if (x.size() != y.size() || x.empty()) {
    throw std::invalid_argument("log-log plot needs matching non-empty series");
  }
  double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) continue;
    lx0 = std::min(lx0, std::log10(x[i]));
    lx1 = std::max(lx1, std::log10(x[i]));
    ly0 = std::min(ly0, std::log10(y[i]));
    ly1 = std::max(ly1, std::log10(y[i]));
  }
  if (lx0 > lx1) lx0 = lx1 = 0;
  if (ly0 > ly1) ly0 = ly1 = 0;
  if (lx1 - lx0 < 1e-9) lx1 = lx0 + 1;
  if (ly1 - ly0 < 1e-9) ly1 = ly0 + 1;
  const double inner = kSize - 2 * kMargin;
  auto px = [&](double v) { return kMargin + (std::log10(v) - lx0) / (lx1 - lx0) * inner; };
  auto py = [&](double v) {
    return kMargin + (ly1 - std::log10(v)) / (ly1 - ly0) * inner;
  };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
    << kSize << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << inner
    << "\" height=\"" << inner << "\" fill=\"none\" stroke=\"#888\"/>\n"
    << "<text x=\"" << kSize / 2 << "\" y=\"" << kSize - 10
    << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << " (log)</text>\n"
    << "<text x=\"12\" y=\"" << kSize / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 "
    << kSize / 2 << ")\" text-anchor=\"middle\">" << y_label << " (log)</text>\n"
    << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0 && y[i] > 0) s << Num(px(x[i])) << "," << Num(py(y[i])) << " ";
  }
  s << "\"/>\n<g fill=\"#1f5fa8\">\n";
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0 && y[i] > 0) {
      s << "<circle cx=\"" << Num(px(x[i])) << "\" cy=\"" << Num(py(y[i])) << "\" r=\"3\"/>\n";
    }
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

}  // namespace dpdm::cli
