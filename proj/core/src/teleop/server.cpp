#include "nti/teleop/server.hpp"

#include <atomic>
#include <deque>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

namespace nti::teleop {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::unique_ptr<Session> session, std::chrono::milliseconds tick)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(std::move(session)), tick_(tick) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void close() {
    closed_ = true;
    timer_.cancel();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    send(session_->hello());
    send(session_->state_frame());
    read();
    next_tick_ = std::chrono::steady_clock::now() + tick_;
    arm_timer();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      timer_.cancel();
      return;
    }
    if (!ws_.got_text()) {
      buffer_.consume(buffer_.size());
      send(session_->error_reply("binary messages are not supported"));
    } else {
      const std::string text = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      for (auto& reply : session_->receive(text)) send(reply);
    }
    read();
  }

  void arm_timer() {
    timer_.expires_at(next_tick_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
  }

  void on_tick(beast::error_code ec) {
    if (ec || closed_) return;
    send(session_->tick());
    next_tick_ += tick_;
    arm_timer();
  }

  void send(const nlohmann::json& message) {
    if (closed_) return;
    outbox_.push_back(message.dump());
    if (outbox_.size() == 1) write();
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->on_write(ec);
                    });
  }

  void on_write(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      timer_.cancel();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  std::unique_ptr<Session> session_;
  std::chrono::milliseconds tick_;
  std::chrono::steady_clock::time_point next_tick_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  Impl(const sim::Simulator& s, ServerOptions o)
      : sim(s), options(std::move(o)), acceptor(io), writer(options.writer_queue) {}

  void accept() {
    acceptor.async_accept(io, [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      const std::size_t id = opened++;
      auto session = std::make_unique<Session>(sim, options.session, fmt::format("session{:03d}", id),
                                               options.base_seed + id, writer);
      auto conn = std::make_shared<Connection>(std::move(socket), std::move(session), options.tick);
      connections.push_back(conn);
      conn->start();
      accept();
    });
  }

  const sim::Simulator& sim;
  ServerOptions options;
  asio::io_context io{1};
  tcp::acceptor acceptor;
  BackgroundWriter writer;
  std::vector<std::weak_ptr<Connection>> connections;
  std::atomic<std::size_t> opened{0};
};

Server::Server(const sim::Simulator& sim, ServerOptions options)
    : impl_(std::make_unique<Impl>(sim, std::move(options))) {
  impl_->options.session.filter.validate();
  if (impl_->options.tick.count() <= 0) throw std::invalid_argument("tick must be positive");
  beast::error_code ec;
  const auto address = asio::ip::make_address(impl_->options.address, ec);
  if (ec) throw std::runtime_error("invalid bind address: " + impl_->options.address);
  const tcp::endpoint endpoint(address, impl_->options.port);
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw std::runtime_error(fmt::format("cannot bind {}:{}: {}", impl_->options.address,
                                         impl_->options.port, ec.message()));
  }
}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t Server::sessions_opened() const { return impl_->opened.load(); }

void Server::run() {
  impl_->accept();
  impl_->io.run();
  for (auto& weak : impl_->connections) {
    if (auto conn = weak.lock()) conn->close();
  }
  impl_->writer.flush();
}

void Server::stop() {
  asio::post(impl_->io, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    impl_->io.stop();
  });
}

}  // namespace nti::teleop
