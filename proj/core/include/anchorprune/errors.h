// Copyright 2026 The Anchorprune Authors. All Rights Reserved.
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

#ifndef ANCHORPRUNE_ERRORS_H_
#define ANCHORPRUNE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace anchorprune {

// Raised for any malformed or inconsistent user input. `locus()` names the
// offending record ("annotations[3]", "line 12", "layers[0].anchors[2]").
class InputError : public std::runtime_error {
 public:
  InputError(std::string locus, const std::string& message)
      : std::runtime_error(locus.empty() ? message : locus + ": " + message),
        locus_(std::move(locus)),
        message_(message) {}

  const std::string& locus() const { return locus_; }
  const std::string& message() const { return message_; }

 private:
  std::string locus_;
  std::string message_;
};

// A detection dump or configuration does not belong to the head or ground
// truth it is used with.
class BindingError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace anchorprune

#endif  // ANCHORPRUNE_ERRORS_H_
