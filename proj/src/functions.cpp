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

#include "qmat/functions.hpp"

#include <cmath>

#include "qmat/errors.hpp"

namespace qmat {

FunctionRegistry FunctionRegistry::builtins() {
    FunctionRegistry reg;
    reg.add({"identity", [](double x) { return x; }, [](double) { return 1.0; }, Parity::Odd,
             -1e300, 1e300, 1.0, "all reals"});
    reg.add({"cube", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; },
             Parity::Odd, -1e300, 1e300, 0.0, "all reals"});
    reg.add({"sin", [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
             Parity::Odd, -1e300, 1e300, 1.0, "all reals"});
    reg.add({"square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; },
             Parity::Even, -1e300, 1e300, 0.0, "all reals"});
    // cos(0) != 0, so cos(x)/x has no finite limit at zero; operands with a
    // zero eigenvalue are rejected at lowering time.
    reg.add({"cos", [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); },
             Parity::Even, -1e300, 1e300, std::nullopt, "all reals"});
    reg.add({"log", [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; },
             Parity::General, 1e-12, 1e300, std::nullopt, "positive spectrum"});
    reg.add({"shifted-exp", [](double x) { return std::expm1(x); }, [](double x) { return std::exp(x); },
             Parity::General, -1e300, 1e300, 1.0, "all reals"});
    return reg;
}

void FunctionRegistry::add(FunctionSpec spec) { specs_[spec.name] = std::move(spec); }

bool FunctionRegistry::contains(const std::string& name) const { return specs_.count(name) > 0; }

const FunctionSpec& FunctionRegistry::get(const std::string& name) const {
    auto it = specs_.find(name);
    if (it == specs_.end())
        throw Error(ErrorCategory::Parse, "UnknownFunction", "no registered function named '" + name + "'");
    return it->second;
}

std::vector<std::string> FunctionRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : specs_) out.push_back(k);
    return out;
}

}  // namespace qmat
