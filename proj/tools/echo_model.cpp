// Reference model server: replies with the mean of each input row.
//   hsicx-echo-model [--mode mean|malformed|nan] [--delay-ms N]          NDJSON on stdin/stdout
//   hsicx-echo-model --http PORT ...                                     POST /predict, POST /shutdown

#include "hsicx/model.hpp"
#include "hsicx/protocol.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <limits>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

namespace {

struct Options {
  std::string mode = "mean";
  int delay_ms = 0;
  int port = -1;
};

hsicx::Outputs predict(const hsicx::InputBatch& batch, const Options& options) {
  if (options.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(options.delay_ms));
  hsicx::Outputs out(static_cast<Eigen::Index>(batch.rows.size()), 1);
  for (std::size_t r = 0; r < batch.rows.size(); ++r)
    out(static_cast<Eigen::Index>(r), 0) =
        options.mode == "nan" ? std::numeric_limits<double>::quiet_NaN() : hsicx::mean_of(batch.rows[r]);
  return out;
}

std::string reply(const std::string& line, const Options& options) {
  if (options.mode == "malformed") return "{\"id\":";
  try {
    return hsicx::serve_line(line, [&](const hsicx::InputBatch& b) { return predict(b, options); });
  } catch (const std::exception& e) {
    return std::string("{\"error\":\"") + e.what() + "\"}";
  }
}

int serve_stdio(const Options& options) {
  std::ios::sync_with_stdio(false);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << reply(line, options) << '\n' << std::flush;
  }
  return 0;
}

int serve_http(const Options& options) {
  httplib::Server server;
  server.set_tcp_nodelay(true);
  server.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    res.set_content(reply(req.body, options) + "\n", "application/json");
  });
  server.Post("/shutdown", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("bye\n", "text/plain");
    server.stop();
  });
  int port = options.port;
  if (port == 0)
    port = server.bind_to_any_port("127.0.0.1");
  else if (!server.bind_to_port("127.0.0.1", port))
    port = -1;
  if (port < 0) {
    std::cerr << "cannot bind\n";
    return 1;
  }
  std::cout << "listening " << port << '\n' << std::flush;
  return server.listen_after_bind() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  Options options;
  CLI::App app{"hsicx reference model: mean of each input"};
  app.add_option("--mode", options.mode, "mean, malformed or nan")
      ->check(CLI::IsMember({"mean", "malformed", "nan"}));
  app.add_option("--delay-ms", options.delay_ms, "sleep before each reply");
  app.add_option("--http", options.port, "serve HTTP on PORT (0 = any free port)");
  CLI11_PARSE(app, argc, argv);
  return options.port >= 0 ? serve_http(options) : serve_stdio(options);
}
