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

#include "qmat/expr.hpp"

#include <algorithm>
#include <cctype>

#include "qmat/errors.hpp"

namespace qmat {

const char* node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Leaf: return "leaf";
        case NodeKind::Add: return "add";
        case NodeKind::Mult: return "mult";
        case NodeKind::KronSum: return "ksum";
        case NodeKind::Tensor: return "tensor";
        case NodeKind::Hadamard: return "had";
        case NodeKind::Func: return "fn";
    }
    return "?";
}

int ExprNode::depth() const {
    int d = 0;
    for (const auto& c : children) d = std::max(d, c.depth());
    return d + 1;
}

bool ExprNode::structurally_equal(const ExprNode& other) const {
    if (kind != other.kind || name != other.name || children.size() != other.children.size())
        return false;
    for (std::size_t i = 0; i < children.size(); ++i)
        if (!children[i].structurally_equal(other.children[i])) return false;
    return true;
}

namespace {

struct Parser {
    const std::string& text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[noreturn]] void fail(const std::string& what) {
        throw Error(ErrorCategory::Parse, "SyntaxError",
                    what + " at position " + std::to_string(pos));
    }

    void expect(char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c) fail(std::string("expected '") + c + "'");
        ++pos;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
        auto tail = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
        if (pos >= text.size() || !head(text[pos])) fail("expected identifier");
        ++pos;
        while (pos < text.size() && tail(text[pos])) ++pos;
        return text.substr(start, pos - start);
    }

    // Function names additionally allow '-' (e.g. shifted-exp).
    std::string fn_ident() {
        std::string base = ident();
        while (pos < text.size() && text[pos] == '-') {
            ++pos;
            base += '-';
            base += ident();
        }
        return base;
    }

    ExprNode expr() {
        std::string head = ident();
        static const std::map<std::string, NodeKind> binary = {
            {"add", NodeKind::Add},       {"mult", NodeKind::Mult},
            {"tensor", NodeKind::Tensor}, {"ksum", NodeKind::KronSum},
            {"had", NodeKind::Hadamard},
        };
        if (head == "fn") {
            expect(':');
            ExprNode node;
            node.kind = NodeKind::Func;
            node.name = fn_ident();
            expect('(');
            node.children.push_back(expr());
            expect(')');
            return node;
        }
        auto it = binary.find(head);
        if (it != binary.end() && peek_is('(')) {
            ExprNode node;
            node.kind = it->second;
            expect('(');
            node.children.push_back(expr());
            expect(',');
            node.children.push_back(expr());
            expect(')');
            return node;
        }
        ExprNode leaf;
        leaf.kind = NodeKind::Leaf;
        leaf.name = head;
        return leaf;
    }
};

void validate(const ExprNode& node, const MatrixRegistry& matrices, const FunctionRegistry& fns) {
    if (node.kind == NodeKind::Leaf) {
        if (!matrices.contains(node.name))
            throw Error(ErrorCategory::Parse, "UnknownMatrix",
                        "leaf '" + node.name + "' not found in the registry");
        return;
    }
    if (node.kind == NodeKind::Func && !fns.contains(node.name))
        throw Error(ErrorCategory::Parse, "UnknownFunction",
                    "function '" + node.name + "' not registered");
    for (const auto& c : node.children) validate(c, matrices, fns);
}

void annotate(ExprNode& node, const MatrixRegistry& matrices, const std::string& path) {
    for (std::size_t i = 0; i < node.children.size(); ++i)
        annotate(node.children[i], matrices, path + "." + std::to_string(i));
    switch (node.kind) {
        case NodeKind::Leaf:
            node.dim = matrices.get(node.name).dim();
            break;
        case NodeKind::Add:
        case NodeKind::Mult:
        case NodeKind::Hadamard: {
            const auto& l = node.children[0];
            const auto& r = node.children[1];
            if (l.dim != r.dim)
                throw Error(ErrorCategory::Dim, "DimensionMismatch",
                            std::string(node_kind_name(node.kind)) + " at " + path + ": got " +
                                std::to_string(r.dim) + ", expected " + std::to_string(l.dim));
            node.dim = l.dim;
            break;
        }
        case NodeKind::KronSum:
        case NodeKind::Tensor:
            node.dim = node.children[0].dim * node.children[1].dim;
            break;
        case NodeKind::Func:
            node.dim = node.children[0].dim;
            break;
    }
}

}  // namespace

ExprNode parse(const std::string& text, const MatrixRegistry& matrices,
               const FunctionRegistry& functions) {
    Parser p{text};
    ExprNode node = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    validate(node, matrices, functions);
    infer_dims(node, matrices);
    return node;
}

ExprNode& infer_dims(ExprNode& node, const MatrixRegistry& matrices) {
    annotate(node, matrices, "root");
    return node;
}

std::string pretty_print(const ExprNode& node) {
    switch (node.kind) {
        case NodeKind::Leaf: return node.name;
        case NodeKind::Func: return "fn:" + node.name + "(" + pretty_print(node.children[0]) + ")";
        default:
            return std::string(node_kind_name(node.kind)) + "(" + pretty_print(node.children[0]) +
                   "," + pretty_print(node.children[1]) + ")";
    }
}

nlohmann::ordered_json expr_to_json(const ExprNode& node) {
    nlohmann::ordered_json j;
    j["kind"] = node_kind_name(node.kind);
    if (node.kind == NodeKind::Leaf || node.kind == NodeKind::Func) j["name"] = node.name;
    j["dim"] = node.dim;
    if (!node.children.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& c : node.children) arr.push_back(expr_to_json(c));
        j["children"] = arr;
    }
    return j;
}

ExprNode expr_from_json(const nlohmann::json& j) {
    ExprNode node;
    const std::string kind = j.at("kind").get<std::string>();
    static const std::map<std::string, NodeKind> kinds = {
        {"leaf", NodeKind::Leaf},     {"add", NodeKind::Add},   {"mult", NodeKind::Mult},
        {"ksum", NodeKind::KronSum},  {"tensor", NodeKind::Tensor},
        {"had", NodeKind::Hadamard},  {"fn", NodeKind::Func},
    };
    auto it = kinds.find(kind);
    if (it == kinds.end())
        throw Error(ErrorCategory::Parse, "SyntaxError", "unknown node kind '" + kind + "'");
    node.kind = it->second;
    if (j.contains("name")) node.name = j["name"].get<std::string>();
    if (j.contains("dim")) node.dim = j["dim"].get<Index>();
    if (j.contains("children"))
        for (const auto& c : j["children"]) node.children.push_back(expr_from_json(c));
    return node;
}

}  // namespace qmat
