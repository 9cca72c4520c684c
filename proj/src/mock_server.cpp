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

#include "ablate/mock_server.hpp"

#include "ablate/errors.hpp"
#include "ablate/scorer.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ablate {
namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

}  // namespace

MockServer::MockServer(MockServerOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (!(options_.alpha > 0.0)) throw UsageError("mock server: alpha must be positive");
  if (options_.embed_dim < 8) throw UsageError("mock server: embed dim must be >= 8");
  // SO_REUSEADDR only: httplib's default also sets SO_REUSEPORT, which would
  // let a second server silently share an occupied port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes),
                 sizeof(yes));
  });
  install_routes();
}

MockServer::~MockServer() { stop(); }

void MockServer::install_routes() {
  server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"model", options_.model_name}});
  });

  server_->Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
    ++score_requests_;
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return reply_error(res, 400, "request body is not a JSON object");
    }
    const auto context = body.find("context");
    const auto target = body.find("target");
    if (context == body.end() || !context->is_string() || target == body.end() ||
        !target->is_string()) {
      return reply_error(res, 422, "'context' and 'target' must be strings");
    }
    const auto& ctx = context->get_ref<const std::string&>();
    const auto& tgt = target->get_ref<const std::string&>();
    std::size_t vocab = distinct_token_count(ctx, tgt);
    if (const auto v = body.find("vocab_size"); v != body.end()) {
      if (!v->is_number_unsigned() || v->get<std::size_t>() == 0) {
        return reply_error(res, 422, "'vocab_size' must be a positive integer");
      }
      vocab = v->get<std::size_t>();
    }
    try {
      reply(res, 200, to_json(reference_score(ctx, tgt, options_.alpha, vocab)));
    } catch (const Error& e) {
      reply_error(res, 422, e.what());
    }
  });

  server_->Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
    ++embed_requests_;
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return reply_error(res, 400, "request body is not a JSON object");
    }
    const auto text = body.find("text");
    if (text == body.end() || !text->is_string()) {
      return reply_error(res, 422, "'text' must be a string");
    }
    reply(res, 200,
          to_json(mock_embed(split_whitespace(text->get_ref<const std::string&>()),
                             options_.embed_dim)));
  });

  server_->set_logger([this](const httplib::Request& req, const httplib::Response& res) {
    if (options_.log) {
      options_.log(req.method + " " + req.path + " " + std::to_string(res.status) +
                   " " + std::to_string(req.body.size()) + "B");
    }
  });
}

int MockServer::start(int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, port) ? port : -1;
  }
  if (port_ < 0) {
    throw UsageError("mock server: cannot bind " + options_.host + ":" +
                     std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockServer::listen(int port, const std::function<void(int)>& on_bound) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, port) ? port : -1;
  }
  if (port_ < 0) {
    throw UsageError("mock server: cannot bind " + options_.host + ":" +
                     std::to_string(port));
  }
  if (on_bound) on_bound(port_);
  server_->listen_after_bind();
}

void MockServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::url() const {
  return "http://" + options_.host + ":" + std::to_string(port_);
}

}  // namespace ablate
