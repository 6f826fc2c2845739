#include "wire.hpp"

#include <thread>

#include "httplib.h"

namespace crea::detail {

using nlohmann::json;

json post_json(const BackendDescriptor& backend, const std::string& path,
               const json& body) {
  const std::string payload = body.dump();
  const int attempts = 1 + std::max(0, backend.retry_budget);
  std::string last_error;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backend.backoff * (1 << (attempt - 1)));
    }
    httplib::Client client(backend.endpoint);
    client.set_connection_timeout(backend.timeout);
    client.set_read_timeout(backend.timeout);
    client.set_write_timeout(backend.timeout);

    auto result = client.Post(path, payload, "application/json");
    if (!result) {
      last_error = "transport failure: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 500) {
      last_error = "server error " + std::to_string(result->status);
      json err = json::parse(result->body, nullptr, false);
      if (err.is_object() && err.contains("error")) {
        last_error += ": " + err["error"].get<std::string>();
      }
      continue;
    }
    json parsed = json::parse(result->body, nullptr, false);
    if (result->status != 200) {
      std::string message = "backend error " + std::to_string(result->status);
      if (parsed.is_object() && parsed.contains("error")) {
        message += ": " + parsed["error"].get<std::string>();
      }
      throw BackendError(message + " from " + backend.endpoint + path);
    }
    if (parsed.is_discarded() || !parsed.is_object()) {
      throw BackendError("malformed JSON response from " + backend.endpoint +
                         path);
    }
    return parsed;
  }
  throw BackendError("request to " + backend.endpoint + path + " failed after " +
                     std::to_string(attempts) + " attempt(s): " + last_error);
}

}  // namespace crea::detail
