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

#include "qmat/registry.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qmat/errors.hpp"

namespace qmat {

void MatrixRegistry::add(const std::string& name, const Matrix& value) {
    if (name.empty())
        throw Error(ErrorCategory::Parse, "UnknownMatrix", "matrix name must be nonempty");
    if (records_.count(name))
        throw Error(ErrorCategory::Io, "DuplicateMatrix", "matrix '" + name + "' already registered");
    if (value.rows() == 0 || value.cols() == 0)
        throw Error(ErrorCategory::Dim, "EmptyVector", "matrix '" + name + "' is empty");
    if (!value.allFinite())
        throw Error(ErrorCategory::Domain, "NonFinite", "matrix '" + name + "' has non-finite entries");

    MatrixRecord rec;
    rec.orig_rows = value.rows();
    rec.orig_cols = value.cols();
    const Index n = std::max(value.rows(), value.cols());
    rec.padded = Matrix::Zero(n, n);
    rec.padded.topLeftCorner(value.rows(), value.cols()) = value;
    rec.max_norm = max_norm(rec.padded);
    rec.spectral_norm = spectral_norm(rec.padded);
    records_[name] = std::move(rec);
}

void MatrixRegistry::load_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Io, "BadMatrixFile", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("name") || !j.contains("rows") || !j.contains("cols") ||
        !j.contains("entries"))
        throw Error(ErrorCategory::Io, "BadMatrixFile",
                    "expected object with name, rows, cols, entries");
    const std::string name = j["name"].get<std::string>();
    const Index rows = j["rows"].get<Index>();
    const Index cols = j["cols"].get<Index>();
    const auto& entries = j["entries"];
    if (rows < 1 || cols < 1 || !entries.is_array() || static_cast<Index>(entries.size()) != rows)
        throw Error(ErrorCategory::Io, "BadMatrixFile", "entry rows do not match declared shape");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = entries[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw Error(ErrorCategory::Io, "BadMatrixFile", "ragged entry rows rejected");
        for (Index c = 0; c < cols; ++c) {
            const auto& cell = row[static_cast<std::size_t>(c)];
            if (!cell.is_array() || cell.size() != 2)
                throw Error(ErrorCategory::Io, "BadMatrixFile", "entries must be [re, im] pairs");
            m(r, c) = Complex(cell[0].get<double>(), cell[1].get<double>());
        }
    }
    add(name, m);
}

void MatrixRegistry::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::Io, "FileNotFound", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    load_json(ss.str());
}

bool MatrixRegistry::contains(const std::string& name) const { return records_.count(name) > 0; }

const MatrixRecord& MatrixRegistry::get(const std::string& name) const {
    auto it = records_.find(name);
    if (it == records_.end())
        throw Error(ErrorCategory::Parse, "UnknownMatrix", "no registered matrix named '" + name + "'");
    return it->second;
}

std::vector<std::string> MatrixRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : records_) out.push_back(k);
    return out;
}

}  // namespace qmat
