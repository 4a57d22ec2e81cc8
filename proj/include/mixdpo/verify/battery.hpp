// Copyright 2026 The mixdpo Authors.
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
// Property battery run by the verify command and the acceptance suite.

#ifndef MIXDPO_VERIFY_BATTERY_HPP_
#define MIXDPO_VERIFY_BATTERY_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mixdpo::verify {

enum class Fault { kNone, kPolicyExponent };

Fault parse_fault(const std::string& name);
std::string fault_name(Fault fault);

struct Context {
  std::mt19937_64 rng;
  int instances = 0;
  Fault fault = Fault::kNone;
};

struct Outcome {
  bool passed = false;
  // Largest observed violation or error, compared against tolerance.
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct Property {
  std::string name;
  std::string module;
  // Invariant covered, as listed in the coverage manifest.
  std::string invariant;
  int default_instances = 0;
  std::function<Outcome(Context&)> run;
};

struct Result {
  const Property* property = nullptr;
  Outcome outcome;
  double seconds = 0.0;
};

const std::vector<Property>& properties();
const Property& find_property(const std::string& name);

// Runs one property with a seed derived from seed and the property name.
// instances <= 0 selects the default count. Exceptions become failures.
Result run_property(const Property& property, std::uint64_t seed,
                    Fault fault = Fault::kNone, int instances = 0);

std::vector<Result> run_all(std::uint64_t seed, Fault fault = Fault::kNone);

void print_manifest(std::ostream& out);
void print_results(std::ostream& out, const std::vector<Result>& results);

}  // namespace mixdpo::verify

#endif  // MIXDPO_VERIFY_BATTERY_HPP_
