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

#ifndef FEDPOST_SRC_PARALLEL_HPP_
#define FEDPOST_SRC_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fedpost::detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
// captured per index in `errors`; callers decide how to surface them.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn,
                  std::vector<std::exception_ptr>& errors) {
  errors.assign(n, nullptr);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++) guarded(i);
    });
  }
  for (auto& t : workers) t.join();
}

// parallel_for that rethrows the lowest-index failure.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors;
  parallel_for(n, threads, std::forward<Fn>(fn), errors);
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace fedpost::detail

#endif  // FEDPOST_SRC_PARALLEL_HPP_
