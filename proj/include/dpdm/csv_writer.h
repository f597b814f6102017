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

#ifndef DPDM_CSV_WRITER_H_
#define DPDM_CSV_WRITER_H_

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace dpdm {

// Formats with 17 significant digits so values round-trip exactly.
std::string FormatDouble(double v);

// Minimal CSV emitter: fixed header, one call per row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  CsvWriter& Add(double v);
  CsvWriter& Add(long long v);
  CsvWriter& Add(int v) { return Add(static_cast<long long>(v)); }
  CsvWriter& Add(std::string_view v);
  // Finishes the current row. Throws std::logic_error on a column-count
  // mismatch.
  void EndRow();

 private:
  std::ostream& out_;
  size_t columns_;
  size_t current_ = 0;
};

}  // namespace dpdm

#endif  // DPDM_CSV_WRITER_H_
