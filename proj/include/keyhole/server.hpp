#pragma once

// HTTP transport for the gateway. Bodies are single v1 protocol messages.
//
//   POST /v1/sessions    {"session_id"?, "view_mode"?, one of "csv" | "csv_path",
//                         optional "snapshot" | "provenance" text to restore}
//                        -> {"session_id", "state_view"}
//   POST /v1/message     protocol request -> protocol reply
//   GET  /v1/push        ?session_id=&after=&wait_ms=  -> newline-delimited messages
//   GET  /v1/telemetry   ?session_id=  -> TelemetryView message
//   GET  /v1/snapshot    ?session_id=  -> snapshot file text
//   GET  /v1/provenance  ?session_id=  -> provenance file text
//   GET  /v1/health      -> {"v", "sessions"}
//
// Malformed bodies get 400 with an Error message; version mismatches 409;
// an unknown session 404. Request-level failures inside a well-formed
// message come back as a 200 carrying an Error message.

#include <chrono>
#include <memory>
#include <string>

#include "keyhole/gateway.hpp"

namespace keyhole::server {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::chrono::milliseconds max_push_wait{30000};
  bool allow_csv_paths = true;  // sessions may name a server-side CSV file
};

class Server {
 public:
  Server(gateway::Gateway& gw, ServerOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the socket and returns the bound port. Throws Validation when
  // the address is unavailable.
  int bind();
  // Serves until stop(); binds first if needed.
  void run();
  // bind() plus run() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace keyhole::server
