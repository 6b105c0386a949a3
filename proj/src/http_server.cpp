#include "agentgov/http_server.hpp"

#include <set>

#include <httplib.h>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

const std::set<std::string> kIntegerParams{"version", "limit", "first", "count", "after", "wait_ms"};

std::string bearer(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  return header.starts_with(prefix) ? header.substr(prefix.size()) : std::string();
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json query_args(const httplib::Request& req) {
  json args = json::object();
  for (const auto& [key, value] : req.params) {
    if (kIntegerParams.contains(key)) {
      try {
        args[key] = std::stoll(value);
      } catch (const std::exception&) {
        throw GovernanceError(ErrorCode::InvalidArgument, "query parameter '" + key + "' must be an integer", value);
      }
    } else {
      args[key] = value;
    }
  }
  return args;
}

json body_args(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw GovernanceError(ErrorCode::ParseError, "request body is not valid JSON");
  if (!j.is_object()) throw GovernanceError(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return j;
}

using ArgsBuilder = std::function<json(const httplib::Request&)>;

}  // namespace

HttpServer::HttpServer(GovernanceService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  const auto tool_route = [this](std::string tool, ArgsBuilder build) {
    return [this, tool = std::move(tool), build = std::move(build)](const httplib::Request& req, httplib::Response& res) {
      try {
        send_json(res, 200, service_.call_tool(bearer(req), tool, build(req)));
      } catch (const GovernanceError& e) {
        send_json(res, http_status(e.code()), error_body(e));
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", {{"code", "INTERNAL"}, {"message", e.what()}, {"subject", ""}}}});
      }
    };
  };
  const auto with_path = [](ArgsBuilder base, std::string key, int group = 1) -> ArgsBuilder {
    return [base = std::move(base), key = std::move(key), group](const httplib::Request& req) {
      json args = base(req);
      args[key] = req.matches[group].str();
      return args;
    };
  };

  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const auto h = service_.health();
    send_json(res, 200, h);
  });
  s.Get("/v1/tools", [this](const httplib::Request&, httplib::Response& res) { send_json(res, 200, service_.tool_list()); });

  s.Post("/v1/evaluate", tool_route("evaluate_intent", body_args));
  s.Get("/v1/rules/applicable", tool_route("get_applicable_rules", query_args));
  s.Get("/v1/rules", tool_route("get_rules", query_args));
  s.Put("/v1/rules", tool_route("put_rules", body_args));
  s.Post("/v1/rules/validate", tool_route("validate_rules", body_args));
  s.Post("/v1/rules/lint", tool_route("lint_rules", body_args));
  s.Get("/v1/context", tool_route("get_context", query_args));
  s.Put(R"(/v1/context/signals/([^/]+))", tool_route("set_signal", with_path(body_args, "key")));
  s.Delete(R"(/v1/context/signals/([^/]+))", tool_route("clear_signal", with_path(query_args, "key")));
  s.Put(R"(/v1/context/registries/([^/]+))", tool_route("update_registry", with_path(body_args, "name")));
  s.Get("/v1/traces", tool_route("query_traces", query_args));
  s.Get("/v1/traces/verify", tool_route("verify_chain", query_args));
  s.Get("/v1/escalations", tool_route("list_escalations", query_args));
  s.Get(R"(/v1/escalations/([^/]+))", tool_route("get_escalation", with_path(query_args, "escalation_id")));
  s.Post(R"(/v1/escalations/([^/]+)/resolve)", tool_route("resolve_escalation", with_path(body_args, "escalation_id")));
  s.Get("/v1/events", tool_route("poll_events", query_args));

  // Stored canonical lines, newline-delimited, exactly as verify_chain reads them.
  s.Get("/v1/traces/export", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto out = service_.call_tool(bearer(req), "export_traces", json::object());
      std::string body;
      for (const auto& line : out["lines"]) body += line.get<std::string>() + "\n";
      res.set_content(body, "application/x-ndjson");
    } catch (const GovernanceError& e) {
      send_json(res, http_status(e.code()), error_body(e));
    }
  });

  // Server-sent events: one `escalation.*` event per queue event.
  s.Get("/v1/events/stream", [this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t after = 0;
    try {
      // Authorize once up front with a non-blocking poll.
      const auto args = query_args(req);
      after = static_cast<std::uint64_t>(std::max<std::int64_t>(args.value("after", std::int64_t{0}), 0));
      service_.call_tool(bearer(req), "poll_events", {{"after", after}, {"wait_ms", 0}});
    } catch (const GovernanceError& e) {
      send_json(res, http_status(e.code()), error_body(e));
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, after](std::size_t, httplib::DataSink& sink) mutable {
      while (!stopping_ && sink.is_writable()) {
        const auto events = service_.escalations().events_after(after, std::chrono::milliseconds(500));
        std::string chunk;
        for (const auto& e : events) {
          chunk += "id: " + std::to_string(e.sequence) + "\nevent: " + e.type + "\ndata: " + to_json(e).dump() + "\n\n";
          after = e.sequence;
        }
        if (chunk.empty()) chunk = ": keepalive\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
      }
      sink.done();
      return true;
    });
  });

  s.Post("/mcp", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = service_.handle_jsonrpc_text(req.body, bearer(req));
    if (reply.empty()) {
      res.status = 202;
      return;
    }
    res.set_content(reply, "application/json");
  });
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) {
    throw GovernanceError(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port_;
}

void HttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
  stopping_ = true;
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace agentgov
