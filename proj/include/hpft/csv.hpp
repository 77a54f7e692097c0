// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tiny CSV builder. All floating-point values are printed with 9 significant
// digits ("%.9g") so identical runs produce identical bytes.

#include <cstdio>
#include <string>
#include <vector>

namespace hpft {

inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::vector<std::string>& header) {
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) body_ += ',';
            body_ += header[i];
        }
        body_ += '\n';
        fields_ = header.size();
    }

    CsvWriter& cell(const std::string& s) {
        if (in_row_) body_ += ',';
        body_ += s;
        in_row_ = true;
        ++cells_in_row_;
        return *this;
    }
    CsvWriter& cell(double v) { return cell(fmt9(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(long v) { return cell(std::to_string(v)); }
    CsvWriter& cell(size_t v) { return cell(std::to_string(v)); }

    void end_row() {
        body_ += '\n';
        in_row_ = false;
        cells_in_row_ = 0;
    }

    const std::string& str() const { return body_; }
    size_t field_count() const { return fields_; }

  private:
    std::string body_;
    size_t fields_ = 0;
    size_t cells_in_row_ = 0;
    bool in_row_ = false;
};

}  // namespace hpft
