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

#include <string>
#include <vector>

#include <json.hpp>

#include "qmat/functions.hpp"
#include "qmat/registry.hpp"

namespace qmat {

enum class NodeKind { Leaf, Add, Mult, KronSum, Tensor, Hadamard, Func };

const char* node_kind_name(NodeKind k);

/// Immutable after construction; dimension-annotated by the parser.
///
/// Grammar (prefix calls, whitespace-insensitive):
///   expr   := "add(" expr "," expr ")" | "mult(" expr "," expr ")"
///           | "tensor(" expr "," expr ")" | "ksum(" expr "," expr ")"
///           | "had(" expr "," expr ")" | "fn:" NAME "(" expr ")" | NAME
///   NAME   := [A-Za-z_][A-Za-z0-9_]*
struct ExprNode {
    NodeKind kind = NodeKind::Leaf;
    std::string name;  // matrix name for Leaf, function name for Func
    std::vector<ExprNode> children;
    Index dim = 0;

    int depth() const;
    bool structurally_equal(const ExprNode& other) const;
};

/// Parse and validate: all leaves resolved against the matrix registry, all
/// functions against the function registry, dimensions annotated.
ExprNode parse(const std::string& text, const MatrixRegistry& matrices,
               const FunctionRegistry& functions = FunctionRegistry::builtins());

/// (Re)computes dimension annotations bottom-up; idempotent.
ExprNode& infer_dims(ExprNode& node, const MatrixRegistry& matrices);

/// Canonical concrete syntax; parse(pretty_print(e)) is structurally e.
std::string pretty_print(const ExprNode& node);

nlohmann::ordered_json expr_to_json(const ExprNode& node);
ExprNode expr_from_json(const nlohmann::json& j);

}  // namespace qmat
