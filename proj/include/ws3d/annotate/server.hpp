#pragma once

// JSON-over-HTTP front of a Session.
//
//   GET    /scenes
//   GET    /scenes/{id}/bev
//   GET    /scenes/{id}/annotations
//   POST   /scenes/{id}/clicks            {"x","z"} or {"u","v"}, "mode": "active" | "record"
//   POST   /scenes/{id}/accept            {"cuboid": {...}, "confidence"?, "class"?}
//   DELETE /scenes/{id}/annotations/{k}
//
// Errors carry {"error": code, "message": text}: 400 bad_request /
// out_of_range / invalid_cuboid, 404 unknown_scene / unknown_annotation,
// 422 no_points, 503 no_detector.

#include <memory>
#include <string>

#include <json.hpp>

#include "ws3d/annotate/session.hpp"

namespace httplib {
class Server;
}

namespace ws3d::annotate {

nlohmann::json cuboid_to_json(const Cuboid& box);
/// Throws Error on missing fields; does not validate.
Cuboid cuboid_from_json(const nlohmann::json& j);

class Server {
public:
    explicit Server(std::shared_ptr<Session> session);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Also serves files under `dir` at "/" (the browser UI).
    bool mount_static(const std::string& dir);

    /// Binds to an ephemeral port and returns it (-1 on failure).
    int bind_any(const std::string& host = "127.0.0.1");
    bool bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    bool running() const;
    void wait_until_ready() const;

private:
    void routes();

    std::shared_ptr<Session> session_;
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace ws3d::annotate
