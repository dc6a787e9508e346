#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "styleopt/session.hpp"

namespace styleopt {

/// Error surfaced to HTTP clients as {"code": ..., "message": ...}.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// The labeling loop over HTTP-shaped requests, independent of any server.
///
/// Sessions live under data_dir/<session_id>/ and are loaded on first use.
/// Every mutation runs on a copy of the session, is saved, and only then
/// replaces the in-memory state. Mutations of one session are serialized;
/// reads share the session lock.
class StyleService {
 public:
  explicit StyleService(std::filesystem::path data_dir);

  /// Routes one request. Never throws: failures become ApiError bodies.
  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::string& body) noexcept;

  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json next_queries(const std::string& id);
  nlohmann::json current_queries(const std::string& id);
  nlohmann::json post_label(const std::string& id, const nlohmann::json& body);
  nlohmann::json status(const std::string& id);
  nlohmann::json plan(const std::string& id, const nlohmann::json& body);

  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Slot {
    std::shared_mutex mutex;
    Session session;
  };

  std::shared_ptr<Slot> slot(const std::string& id);
  std::string fresh_id();

  std::filesystem::path data_dir_;
  std::mutex slots_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

/// Pair/trajectory view with end-effector paths and timestamps for rendering.
nlohmann::json batch_view(const Session& session, const QueryBatch& batch);

/// cpp-httplib front end. CORS headers go on every response.
class HttpServer {
 public:
  HttpServer(StyleService& service, std::string cors_origin = "*");
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (0 picks a free port) and returns the bound port.
  /// Throws IoError when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace styleopt
