#pragma once

// Runs an ApiServer on an ephemeral localhost port for the lifetime of the object.

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "aiopt/service.hpp"

namespace testsupport {

class RunningServer {
 public:
  explicit RunningServer(aiopt::AppConfig config = {}) : server_(std::make_unique<aiopt::ApiServer>(std::move(config))) {
    port_ = server_->bind_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  ~RunningServer() {
    server_->stop();
    thread_.join();
  }
  RunningServer(const RunningServer&) = delete;
  RunningServer& operator=(const RunningServer&) = delete;

  int port() const { return port_; }
  aiopt::ApiServer& api() { return *server_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    return c;
  }

 private:
  std::unique_ptr<aiopt::ApiServer> server_;
  int port_ = 0;
  std::thread thread_;
};

/// JSON array of the metric records in a samples/ file.
inline std::string metrics_body(const std::string& path) {
  const auto r = aiopt::read_metrics_file(path);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : r.samples) arr.push_back(nlohmann::json::parse(aiopt::serialize_metric_line(s)));
  return arr.dump();
}

/// True if the text contains a token JSON cannot represent.
inline bool contains_non_finite_token(const std::string& body) {
  for (const char* bad : {"NaN", "nan", "Infinity", "inf"}) {
    std::size_t pos = 0;
    while ((pos = body.find(bad, pos)) != std::string::npos) {
      // Accept occurrences inside words such as "infrastructure" or "rebalance".
      const auto end = pos + std::char_traits<char>::length(bad);
      const bool letter_before = pos > 0 && std::isalpha(static_cast<unsigned char>(body[pos - 1]));
      const bool letter_after = end < body.size() && std::isalpha(static_cast<unsigned char>(body[end]));
      if (!letter_before && !letter_after) return true;
      pos = end;
    }
  }
  return false;
}

}  // namespace testsupport
