// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/log.hpp"

namespace dw2 {
namespace {

std::chrono::milliseconds time_left(std::chrono::steady_clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return std::max(left, std::chrono::milliseconds(0));
}

}  // namespace

LocalWall::LocalWall(WallConfig config, LocalWallOptions options) : config_(std::move(config)) {
  validate_config(config_);
  // Everything runs in this process: rewrite hosts to loopback so configs
  // written for a real deployment work unchanged.
  config_.coordinator.host = "127.0.0.1";
  for (auto& d : config_.displays) d.host = "127.0.0.1";
  if (config_.dispatcher) config_.dispatcher->host = "127.0.0.1";

  // Bind displays (and the dispatcher) first and write the actual ports back
  // into the config, so the coordinator's directory is connectable even when
  // the config asked for ephemeral ports.
  auto sink = options.sink ? options.sink : std::make_shared<NullSink>();
  for (uint32_t id = 0; id < config_.display_count(); ++id) {
    DisplayOptions dopts;
    dopts.decomp_threads = options.decomp_threads;
    dopts.sink = sink;
    displays_.push_back(std::make_unique<DisplayProcess>(config_, id, std::move(dopts)));
    config_.displays[id].port = displays_.back()->data_port();
  }
  if (config_.mode == Mode::dispatcher) {
    dispatcher_ = std::make_unique<Dispatcher>(config_);
    config_.dispatcher->port = dispatcher_->port();
  }
  CoordinatorOptions copts;
  copts.session_token = options.session_token;
  coordinator_ = std::make_unique<Coordinator>(config_, copts);
  config_.coordinator.port = coordinator_->port();

  coordinator_->start();
  for (auto& d : displays_) d->start(config_.coordinator);
  if (dispatcher_) dispatcher_->start(config_.coordinator);
  LOG_INFO("local wall: %ux%u displays, %s mode, coordinator on port %u", config_.columns,
           config_.rows, to_string(config_.mode), unsigned(config_.coordinator.port));
}

LocalWall::~LocalWall() { stop(); }

Endpoint LocalWall::coordinator_endpoint() const { return config_.coordinator; }

bool LocalWall::wait_session_end(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  if (!coordinator_->wait_idle(time_left(deadline))) return false;
  for (auto& d : displays_) {
    if (!d->wait_finished(time_left(deadline))) return false;
  }
  if (dispatcher_ && !dispatcher_->wait_finished(time_left(deadline))) return false;
  return true;
}

void LocalWall::stop() {
  {
    std::lock_guard<std::mutex> lock(stop_mutex_);
    if (stopped_) return;
    stopped_ = true;
  }
  // Coordinator first: it broadcasts Shutdown, giving everything still
  // running a chance to wind down before we force-close.
  coordinator_->stop();
  for (auto& d : displays_) d->stop();
  if (dispatcher_) dispatcher_->stop();
  for (auto& d : displays_) d->join();
  if (dispatcher_) dispatcher_->join();
  coordinator_->join();
}

}  // namespace dw2
