/*
 * Copyright 2026 The Ablate Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// In-process HTTP server speaking the scoring wire protocol, backed by the
// reference scorer and the mock embedder.

#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace ablate {

struct MockServerOptions {
  double alpha = 1.0;
  std::size_t embed_dim = 64;
  std::string model_name = "reference-unigram";
  std::string host = "127.0.0.1";
  // Called once per handled request with a single log line.
  std::function<void(const std::string&)> log;
};

class MockServer {
 public:
  explicit MockServer(MockServerOptions options = {});
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Throws UsageError if the port cannot be bound.
  int start(int port = 0);
  // Binds, reports the bound port, then serves on the calling thread until
  // stop() is called.
  void listen(int port, const std::function<void(int)>& on_bound = {});
  void stop();

  int port() const { return port_; }
  std::string url() const;

  std::size_t score_requests() const { return score_requests_.load(); }
  std::size_t embed_requests() const { return embed_requests_.load(); }

 private:
  void install_routes();

  MockServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<std::size_t> score_requests_{0};
  std::atomic<std::size_t> embed_requests_{0};
};

}  // namespace ablate
