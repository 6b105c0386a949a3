#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "agentgov/service.hpp"

namespace httplib {
class Server;
}

namespace agentgov {

/// REST twin of the tool surface plus POST /mcp for JSON-RPC. Credentials
/// arrive as `Authorization: Bearer <token>`; /health is public. Routes are
/// listed in docs/api.md.
class HttpServer {
 public:
  explicit HttpServer(GovernanceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds without serving; port 0 picks a free port. Returns the bound port.
  /// Throws INVALID_ARGUMENT when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves on a background thread (after bind).
  void start();
  /// Serves on the calling thread until stop() (after bind).
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  void install_routes();

  GovernanceService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

}  // namespace agentgov
