// Serves a scripted mock model over the native streaming protocol, for
// exercising the HTTP client and the CLI end to end.

#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cwescan/error.hpp"
#include "cwescan/mock_backend.hpp"

namespace {
cwescan::MockHttpServer* g_server = nullptr;
}

int main(int argc, char** argv) {
  CLI::App app{"scripted mock completion server"};
  std::string script_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  app.add_option("script", script_path, "mock script (JSON)")->required();
  app.add_option("--host", host, "bind host");
  app.add_option("--port", port, "bind port, 0 picks one");
  CLI11_PARSE(app, argc, argv);

  try {
    cwescan::MockHttpServer server(cwescan::MockScript::load(script_path));
    const int bound = server.bind(host, port);
    g_server = &server;
    // Closing the listening socket from the handler is what httplib itself does.
    std::signal(SIGINT, [](int) {
      if (g_server) g_server->stop();
    });
    std::cout << "listening on http://" << host << ":" << bound << "/" << std::endl;
    server.run();
  } catch (const cwescan::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
