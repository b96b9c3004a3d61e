#pragma once

// HTTP binding of the campaign service (cpp-httplib).

#include "service.hpp"

#include <httplib.h>

namespace seqoed {

inline Request to_request(const httplib::Request& r)
{
    Request out;
    out.method = r.method;
    out.path = r.path;
    out.body = r.body;
    out.content_type = r.get_header_value("Content-Type");
    out.if_match = r.get_header_value("If-Match");
    if (out.if_match.size() >= 2 && out.if_match.front() == '"' && out.if_match.back() == '"')
        out.if_match = out.if_match.substr(1, out.if_match.size() - 2);
    for (const auto& [k, v] : r.params)
        out.query[k] = v;
    return out;
}

/// Route every request of `server` to `service`.
inline void bind_routes(httplib::Server& server, Service& service)
{
    const auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        const Response r = service.handle(to_request(req));
        res.status = r.status;
        if (!r.etag.empty())
            res.set_header("ETag", "\"" + r.etag + "\"");
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(r.body, r.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, If-Match");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.status = 204;
    });
}

} // namespace seqoed
