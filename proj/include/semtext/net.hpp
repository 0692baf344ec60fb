#pragma once

// Thin JSON-over-HTTP client used by the remote embedding provider, the external
// reranker and the LLM client.

#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "semtext/error.hpp"

namespace semtext::net {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;   // always starts with '/'
};

inline Url parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        fail(ErrorCode::InvalidArgument, "url needs a scheme: " + url);
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        fail(ErrorCode::InvalidArgument, "unsupported url scheme: " + scheme);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

struct Response {
    int status = 0;
    std::string body;

    bool ok() const noexcept { return status >= 200 && status < 300; }
};

/// POSTs a JSON body. Returns nullopt on transport failure (connect, timeout, TLS).
inline std::optional<Response> post_json(const std::string& url, const std::string& body,
                                         const std::vector<std::pair<std::string, std::string>>& headers,
                                         int timeout_ms) {
    const Url parsed = parse_url(url);
    httplib::Client client(parsed.origin);
    const auto timeout = std::chrono::milliseconds(timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) {
        hdrs.emplace(k, v);
    }
    auto res = client.Post(parsed.path, hdrs, body, "application/json");
    if (!res) {
        return std::nullopt;
    }
    return Response{res->status, res->body};
}

/// Linear backoff between retry attempts.
inline void backoff(int attempt, int base_ms) {
    if (base_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(base_ms * (attempt + 1)));
    }
}

} // namespace semtext::net
