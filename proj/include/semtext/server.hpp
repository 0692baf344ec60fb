#pragma once

// JSON-over-HTTP API:
//   GET  /healthz
//   POST /search   {"query", "top_n", "rerank"}
//   POST /classify {"text", "categories_file"}
//   POST /cluster  {"k", "seed"}
//   POST /tsne     {"perplexity", "seed"}
//   POST /ask      {"question", "top_k"?}
//   POST /ingest   {"path"?}
// Failures answer {"error": {"code", "message"}}.

#include <functional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/service.hpp"

namespace semtext {

inline int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ZeroVector:
    case ErrorCode::OutOfRange:
    case ErrorCode::KTooLarge:
    case ErrorCode::TemplateInvalid:
    case ErrorCode::EmptyCorpus:
        return 400;
    case ErrorCode::NotFound:
        return 404;
    case ErrorCode::ModelMismatch:
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::DimensionDrift:
    case ErrorCode::ScorerUnavailable:
    case ErrorCode::LlmUnavailable:
    case ErrorCode::Busy:
        return 503;
    default:
        return 500;
    }
}

inline std::string error_body(std::string_view code, const std::string& message) {
    return nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& body, const char* name) {
    static const nlohmann::json null_value;
    const auto it = body.find(name);
    return it == body.end() ? null_value : *it;
}

inline std::string string_field(const nlohmann::json& body, const char* name, bool required = true) {
    const auto& v = field(body, name);
    if (v.is_null()) {
        if (required) fail(ErrorCode::EmptyInput, std::string("missing field '") + name + "'");
        return {};
    }
    if (!v.is_string()) fail(ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

inline std::uint64_t uint_field(const nlohmann::json& body, const char* name, std::uint64_t fallback) {
    const auto& v = field(body, name);
    if (v.is_null()) return fallback;
    if (!v.is_number_unsigned()) {
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
        fail(ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

inline double number_field(const nlohmann::json& body, const char* name, double fallback) {
    const auto& v = field(body, name);
    if (v.is_null()) return fallback;
    if (!v.is_number()) fail(ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

inline bool bool_field(const nlohmann::json& body, const char* name, bool fallback) {
    const auto& v = field(body, name);
    if (v.is_null()) return fallback;
    if (!v.is_boolean()) fail(ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a boolean");
    return v.get<bool>();
}

} // namespace detail

class ApiServer {
public:
    explicit ApiServer(Service& service) : service_(service) {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server_.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            const auto h = service_.health();
            res.status = service_.ready() ? 200 : 503;
            res.set_content(h.dump(), "application/json");
        });
        post("/search", [this](const nlohmann::json& b) {
            const auto query = detail::string_field(b, "query");
            return nlohmann::json{{"results", service_.search(query, detail::uint_field(b, "top_n", 10),
                                                              detail::bool_field(b, "rerank", false))}};
        });
        post("/classify", [this](const nlohmann::json& b) {
            const auto text = detail::string_field(b, "text");
            return service_.classify(text, detail::string_field(b, "categories_file"));
        });
        post("/cluster", [this](const nlohmann::json& b) {
            return service_.cluster(detail::uint_field(b, "k", 2), detail::uint_field(b, "seed", 0));
        });
        post("/tsne", [this](const nlohmann::json& b) {
            return service_.tsne(detail::number_field(b, "perplexity", 30.0), detail::uint_field(b, "seed", 0));
        });
        post("/ask", [this](const nlohmann::json& b) {
            const auto question = detail::string_field(b, "question");
            std::optional<std::size_t> top_k;
            if (!detail::field(b, "top_k").is_null()) top_k = detail::uint_field(b, "top_k", 0);
            return service_.ask_json(question, top_k);
        });
        post("/ingest", [this](const nlohmann::json& b) {
            const auto path = detail::string_field(b, "path", false);
            return to_json(path.empty() ? service_.ingest() : service_.ingest(path));
        });
    }

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds without serving. Port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port) {
        const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) fail(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
        return bound;
    }

    /// Serves until stop(). Call bind() first.
    void listen() {
        if (!server_.listen_after_bind()) fail(ErrorCode::IoFailure, "server stopped unexpectedly");
    }

    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }

private:
    using Handler = std::function<nlohmann::json(const nlohmann::json&)>;

    void post(const std::string& route, Handler handler) {
        server_.Post(route, [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
                if (!body.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
                res.set_content(handler(body).dump(), "application/json");
            } catch (const Error& e) {
                res.status = http_status_for(e.code());
                if (e.code() == ErrorCode::Busy) res.set_header("Retry-After", "1");
                res.set_content(error_body(to_string(e.code()), e.what()), "application/json");
            } catch (const nlohmann::json::exception& e) {
                res.status = 400;
                res.set_content(error_body(to_string(ErrorCode::InvalidArgument), e.what()), "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(error_body("Internal", e.what()), "application/json");
            }
        });
    }

    Service& service_;
    httplib::Server server_;
};

} // namespace semtext
