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

#include "dpdm/csv_writer.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dpdm {

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header)
    : out_(out), columns_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

CsvWriter& CsvWriter::Add(double v) { return Add(std::string_view(FormatDouble(v))); }

CsvWriter& CsvWriter::Add(long long v) {
  return Add(std::string_view(std::to_string(v)));
}

CsvWriter& CsvWriter::Add(std::string_view v) {
  if (current_ > 0) out_ << ',';
  out_ << v;
  ++current_;
  return *this;
}

void CsvWriter::EndRow() {
  if (current_ != columns_) throw std::logic_error("CSV row has wrong column count");
  out_ << '\n';
  current_ = 0;
}

}  // namespace dpdm
