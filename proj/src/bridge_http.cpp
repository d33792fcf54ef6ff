#include <thread>

// httplib pulls in system headers whose macros clash with Eigen; include it last.
#include "strawbot/bridge.hpp"
#include "httplib.h"

namespace strawbot {

struct HttpServer::Impl {
  SimHost& host;
  httplib::Server server;
  std::thread thread;

  explicit Impl(SimHost& h) : host(h) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      const WireResponse r = host.handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Get(".*", route);
    server.Post(".*", route);
    server.Put(".*", route);
    server.Delete(".*", route);
    server.Patch(".*", route);
  }
};

HttpServer::HttpServer(SimHost& host) : impl_(std::make_unique<Impl>(host)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& address, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(address);
  } else if (!impl_->server.bind_to_port(address, port)) {
    bound = -1;
  }
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& address, int port) { return impl_->server.listen(address, port); }

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

struct HttpClient::Impl {
  httplib::Client client;
  Impl(const std::string& host, int port) : client(host, port) {}
};

HttpClient::HttpClient(const std::string& host, int port) : impl_(std::make_unique<Impl>(host, port)) {}

HttpClient::~HttpClient() = default;

WireResponse HttpClient::request(const std::string& method, const std::string& path, const std::string& body) {
  httplib::Result r = method == "GET" ? impl_->client.Get(path)
                      : method == "POST" ? impl_->client.Post(path, body, "application/json")
                      : method == "PUT" ? impl_->client.Put(path, body, "application/json")
                                        : impl_->client.Delete(path);
  if (!r) throw std::runtime_error("HTTP request failed: " + httplib::to_string(r.error()));
  return {r->status, r->body};
}

}  // namespace strawbot
