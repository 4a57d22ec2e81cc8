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
#ifndef MIXDPO_ERROR_HPP_
#define MIXDPO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mixdpo {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN or infinity appeared where a finite value was required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Throws Error(message) when the condition is false.
inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace mixdpo

#endif  // MIXDPO_ERROR_HPP_
