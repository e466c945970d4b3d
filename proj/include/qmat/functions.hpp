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

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qmat {

enum class Parity { Odd, Even, General };

/// A real scalar function h applied to matrix eigenvalues. Parity drives the
/// lowering route: odd functions commute with the Hermitian embedding, even
/// ones factor into the odd pair h(x)/x and x, general ones split into even
/// and odd halves.
struct FunctionSpec {
    std::string name;
    std::function<double(double)> eval;
    std::function<double(double)> deriv;  // used for Lipschitz budget bounds
    Parity parity = Parity::General;
    double domain_lo = -1e300;
    double domain_hi = 1e300;
    /// Value of h(x)/x at x = 0 (the limit h'(0) when h(0) = 0); empty means
    /// the even factorization is undefined on spectra containing zero.
    std::optional<double> g_at_zero;
    std::string domain_note;

    bool in_domain(double x) const { return x >= domain_lo && x <= domain_hi; }
};

class FunctionRegistry {
  public:
    /// identity, cube, sin (odd); square, cos (even); log, shifted-exp
    /// (general). log is restricted to positive spectra; shifted-exp is
    /// expm1, whose value at zero keeps the general split regular there.
    static FunctionRegistry builtins();

    void add(FunctionSpec spec);
    bool contains(const std::string& name) const;
    const FunctionSpec& get(const std::string& name) const;  // throws UnknownFunction
    std::vector<std::string> names() const;

  private:
    std::map<std::string, FunctionSpec> specs_;
};

}  // namespace qmat
