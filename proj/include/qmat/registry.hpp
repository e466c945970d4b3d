// Copyright 2026 The qmat authors
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

#pragma once

#include <map>
#include <string>
#include <vector>

#include "qmat/matrix.hpp"

namespace qmat {

/// A named input matrix. Non-square inputs are zero-padded to square at
/// registration; the original shape is kept so results can be masked back.
struct MatrixRecord {
    Matrix padded;       // square, side N
    Index orig_rows = 0;
    Index orig_cols = 0;
    double max_norm = 0.0;       // max entry magnitude of the padded matrix
    double spectral_norm = 0.0;  // largest singular value, cached for budgets

    Index dim() const { return padded.rows(); }
    bool was_padded() const { return orig_rows != orig_cols; }
};

class MatrixRegistry {
  public:
    void add(const std::string& name, const Matrix& value);

    /// Parses {"name": str, "rows": int, "cols": int, "entries": [[[re,im],...],...]}.
    /// Ragged or malformed entries are rejected.
    void load_json(const std::string& text);
    void load_file(const std::string& path);

    bool contains(const std::string& name) const;
    const MatrixRecord& get(const std::string& name) const;  // throws UnknownMatrix
    std::vector<std::string> names() const;
    std::size_t size() const { return records_.size(); }

  private:
    std::map<std::string, MatrixRecord> records_;
};

}  // namespace qmat
