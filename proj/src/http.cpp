#include <atomic>
#include <thread>

#include "httplib.h"
#include "mrag/error.hpp"
#include "mrag/log.hpp"
#include "mrag/services.hpp"

namespace mrag::services {

using nlohmann::json;

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
  peak_ = std::max(peak_, active_);
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

std::size_t InFlightLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

namespace {

struct LimiterGuard {
  InFlightLimiter& limiter;
  explicit LimiterGuard(InFlightLimiter& l) : limiter(l) { limiter.acquire(); }
  ~LimiterGuard() { limiter.release(); }
};

}  // namespace

HttpJsonClient::HttpJsonClient(EndpointConfig config)
    : config_(std::move(config)), limiter_(config_.max_in_flight) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint '" + config_.name + "': url '" + config_.url + "' lacks a scheme");
  }
  const auto path_start = config_.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = config_.url;
  } else {
    scheme_host_port_ = config_.url.substr(0, path_start);
    path_prefix_ = config_.url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (config_.retries < 1) config_.retries = 1;
}

json HttpJsonClient::post(const std::string& path, const json& body) {
  LimiterGuard guard(limiter_);
  const std::string payload = body.dump();
  const std::string full_path = path_prefix_ + path;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.retries; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.auth.empty()) headers.emplace("Authorization", "Bearer " + config_.auth);

    auto res = client.Post(full_path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw ProtocolError("endpoint '" + config_.name + "' " + full_path + " answered HTTP " +
                          std::to_string(res->status) + ": " + res->body);
    } else {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw ProtocolError("endpoint '" + config_.name + "' returned malformed JSON: " + e.what());
      }
    }
    log::warn("endpoint '" + config_.name + "' attempt " + std::to_string(attempt) + "/" +
              std::to_string(config_.retries) + " failed: " + last_error);
    if (attempt < config_.retries) std::this_thread::sleep_for(config_.retry_backoff * attempt);
  }
  throw ServiceError("endpoint '" + config_.name + "' failed after " + std::to_string(config_.retries) +
                     " attempts: " + last_error);
}

namespace {

template <typename Response>
Response decode(const json& j, const std::string& endpoint) {
  try {
    return j.get<Response>();
  } catch (const Error& e) {
    throw ProtocolError("endpoint '" + endpoint + "': " + e.what());
  } catch (const json::exception& e) {
    throw ProtocolError("endpoint '" + endpoint + "': " + e.what());
  }
}

}  // namespace

RetrieveResponse HttpRetriever::retrieve(const RetrieveRequest& request) {
  return decode<RetrieveResponse>(client_.post("/retrieve", json(request)), endpoint_name());
}

RerankResponse HttpReranker::rerank(const RerankRequest& request) {
  return decode<RerankResponse>(client_.post("/rerank", json(request)), endpoint_name());
}

GenerateResponse HttpGenerator::generate(const GenerateRequest& request) {
  return decode<GenerateResponse>(client_.post("/generate", json(request)), endpoint_name());
}

// ---- mock server ----------------------------------------------------------

struct MockServer::Impl {
  MockFixtures fixtures;
  std::unique_ptr<MockRetriever> retriever;
  std::unique_ptr<MockReranker> reranker;
  std::map<std::string, std::unique_ptr<MockGenerator>> generators;
  httplib::Server server;
  std::thread thread;
  std::atomic<std::size_t> requests{0};

  explicit Impl(MockFixtures fx) : fixtures(std::move(fx)) {
    retriever = std::make_unique<MockRetriever>(fixtures.corpus);
    reranker = std::make_unique<MockReranker>(fixtures.reranker, fixtures.corpus);
    for (const auto& [id, cfg] : fixtures.generators) {
      generators.emplace(id, std::make_unique<MockGenerator>(id, cfg));
    }
    install_routes();
  }

  template <typename Request, typename Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    ++requests;
    try {
      const Request request = json::parse(req.body).get<Request>();
      res.set_content(json(fn(request)).dump(), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  }

  void install_routes() {
    server.Post("/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
      handle<RetrieveRequest>(req, res, [this](const RetrieveRequest& r) { return retriever->retrieve(r); });
    });
    server.Post("/rerank", [this](const httplib::Request& req, httplib::Response& res) {
      handle<RerankRequest>(req, res, [this](const RerankRequest& r) { return reranker->rerank(r); });
    });
    server.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      handle<GenerateRequest>(req, res, [this](const GenerateRequest& r) {
        const auto it = generators.find(r.generator_id);
        if (it == generators.end()) throw PreconditionError("unknown generator_id '" + r.generator_id + "'");
        return it->second->generate(r);
      });
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
  }
};

MockServer::MockServer(MockFixtures fixtures) : impl_(std::make_unique<Impl>(std::move(fixtures))) {}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw ServiceError("mock server could not bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void MockServer::serve_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw ServiceError("mock server could not listen on " + host + ":" + std::to_string(port));
  }
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t MockServer::request_count() const { return impl_->requests.load(); }

}  // namespace mrag::services
