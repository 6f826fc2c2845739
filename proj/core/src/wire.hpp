#pragma once

#include <string>

#include "crea/gateway.hpp"
#include "json.hpp"

namespace crea::detail {

// POST a JSON body to endpoint+path with bounded retries and exponential
// backoff. Connection failures and 5xx responses are retried; other error
// statuses surface the backend's {"error": ...} payload immediately.
nlohmann::json post_json(const BackendDescriptor& backend,
                         const std::string& path, const nlohmann::json& body);

}  // namespace crea::detail
