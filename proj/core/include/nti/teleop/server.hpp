#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "nti/teleop/session.hpp"

namespace nti::teleop {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  SessionOptions session;
  std::uint64_t base_seed = 0;  // session i runs with seed base_seed + i
  std::chrono::milliseconds tick{50};
  std::size_t writer_queue = 8;
};

// WebSocket service: one Session per connection, a hello and an immediate StateFrame on
// connect, then one StateFrame per tick. All sessions run on the thread that calls run().
class Server {
 public:
  // Binds and listens; throws std::runtime_error when the address cannot be bound.
  Server(const sim::Simulator& sim, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  // Serves until stop(); pending episode writes are flushed before returning.
  void run();
  // Thread-safe.
  void stop();
  std::size_t sessions_opened() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nti::teleop
