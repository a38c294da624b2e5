/*
 * Copyright 2026 The fedpost Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDPOST_TOOLS_CLI_HPP_
#define FEDPOST_TOOLS_CLI_HPP_

#include "fedpost/fedpost.h"

namespace fedpost::cli {

enum ExitCode {
  kExitOk = 0,
  kExitConfig = 1,
  kExitRuntime = 2,
  kExitOracle = 3,
  kExitTrend = 4,
};

// Entry point shared by the fedpost binary and test fixtures. A non-null
// `delta_override` replaces the DP estimator checked by oracle-check.
int main(int argc, char** argv, fedpost_delta_fn delta_override = nullptr,
         void* delta_user = nullptr);

}  // namespace fedpost::cli

#endif  // FEDPOST_TOOLS_CLI_HPP_
