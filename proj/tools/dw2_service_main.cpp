// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0
//
// Display service launcher. One process per role in a real deployment
// (--role coordinator | display --display-id N | dispatcher), or everything
// in one process on one host with --local-wall.

#include <csignal>
#include <cstdio>
#include <functional>

#include <CLI11.hpp>

#include "dw2/client.hpp"
#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/log.hpp"
#include "dw2/sink.hpp"

namespace {

volatile std::sig_atomic_t g_signalled = 0;

void on_signal(int) { g_signalled = 1; }

// Park until SIGINT/SIGTERM or until `done` reports true. `done` carries its
// own 200 ms wait, so this loop is a slow poll, not a spin.
void wait_for_exit(const std::function<bool()>& done) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (g_signalled == 0 && !done()) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dw2 display wall service"};

  std::string config_path;
  std::string mode_override;
  std::string sink_spec = "null";
  std::string log_level = "info";
  std::string role = "coordinator";
  unsigned decomp_threads = 0;
  uint32_t display_id = 0;
  bool local_wall = false;

  app.add_option("--config", config_path, "wall configuration (JSON)")->required();
  app.add_option("--mode", mode_override, "override config mode")
      ->check(CLI::IsMember({"dispatcher", "direct"}));
  app.add_option("--sink", sink_spec, "completed-frame sink: png:<dir> | null");
  app.add_option("--decomp-threads", decomp_threads, "decompression threads per display (0 = auto)");
  app.add_option("--log-level", log_level, "error | warn | info | debug");
  app.add_option("--role", role, "process role in a distributed launch")
      ->check(CLI::IsMember({"coordinator", "display", "dispatcher"}));
  app.add_option("--display-id", display_id, "display id for --role display");
  app.add_flag("--local-wall", local_wall, "run every role of the wall in this process");

  CLI11_PARSE(app, argc, argv);

  try {
    dw2::log::set_level(dw2::log::parse_level(log_level));
    dw2::WallConfig config = dw2::load_config(config_path);
    if (!mode_override.empty()) config.mode = dw2::parse_mode(mode_override);
    dw2::validate_config(config);
    auto sink = dw2::make_sink(sink_spec);

    if (local_wall) {
      dw2::LocalWallOptions options;
      options.sink = sink;
      options.decomp_threads = decomp_threads;
      dw2::LocalWall wall(config, options);
      std::fprintf(stderr, "local wall ready: coordinator at %s:%u, %s mode\n",
                   wall.coordinator_endpoint().host.c_str(),
                   unsigned(wall.coordinator_endpoint().port), dw2::to_string(config.mode));
      // Serve sessions until the first one finishes or a signal arrives.
      wait_for_exit([&] { return wall.wait_session_end(std::chrono::milliseconds(200)); });
      wall.stop();
      return 0;
    }

    if (role == "coordinator") {
      dw2::Coordinator coordinator(config);
      coordinator.start();
      std::fprintf(stderr, "coordinator listening on port %u\n", unsigned(coordinator.port()));
      wait_for_exit([&] { return coordinator.wait_idle(std::chrono::milliseconds(200)); });
      coordinator.stop();
      coordinator.join();
      return coordinator.error().empty() ? 0 : 1;
    }
    if (role == "display") {
      dw2::DisplayOptions options;
      options.decomp_threads = decomp_threads;
      options.sink = sink;
      dw2::DisplayProcess display(config, display_id, options);
      std::fprintf(stderr, "display %u accepting tiles on port %u\n", display_id,
                   unsigned(display.data_port()));
      display.start(config.coordinator);
      wait_for_exit([&] { return display.wait_finished(std::chrono::milliseconds(200)); });
      display.stop();
      display.join();
      return display.error().empty() ? 0 : 1;
    }
    // dispatcher
    dw2::Dispatcher dispatcher(config);
    std::fprintf(stderr, "dispatcher accepting clients on port %u\n",
                 unsigned(dispatcher.port()));
    dispatcher.start(config.coordinator);
    wait_for_exit([&] { return dispatcher.wait_finished(std::chrono::milliseconds(200)); });
    dispatcher.stop();
    dispatcher.join();
    return dispatcher.error().empty() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
