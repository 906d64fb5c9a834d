#include "ws3d/annotate/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>

namespace ws3d::annotate {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    reply(res, status, {{"error", code}, {"message", message}});
}

double number(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw Error(std::string("missing numeric field '") + key + "'");
    const double v = j[key].get<double>();
    if (!std::isfinite(v)) throw Error(std::string("field '") + key + "' is not finite");
    return v;
}

std::string encode(const std::vector<float>& channel) {
    const auto bytes = to_bytes(channel);
    return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

json corners_json(const Cuboid& box) {
    json out = json::array();
    for (const auto& c : bev_corners(box)) out.push_back({c.x, c.z});
    return out;
}

// Runs a handler and maps exceptions onto error responses.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const UnknownScene& e) {
            fail(res, 404, "unknown_scene", e.what());
        } catch (const OutOfWindow& e) {
            fail(res, 400, "out_of_range", e.what());
        } catch (const EmptyProposal& e) {
            fail(res, 422, "no_points", e.what());
        } catch (const NoDetector& e) {
            fail(res, 503, "no_detector", e.what());
        } catch (const std::out_of_range& e) {
            fail(res, 404, "unknown_annotation", e.what());
        } catch (const json::exception& e) {
            fail(res, 400, "bad_request", e.what());
        } catch (const Error& e) {
            fail(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            fail(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

json cuboid_to_json(const Cuboid& b) {
    return {{"x", b.cx}, {"y", b.cy}, {"z", b.cz}, {"h", b.h}, {"w", b.w}, {"l", b.l}, {"theta", b.theta}};
}

Cuboid cuboid_from_json(const json& j) {
    if (!j.is_object()) throw Error("cuboid must be an object");
    return {number(j, "x"), number(j, "y"), number(j, "z"), number(j, "h"),
            number(j, "w"), number(j, "l"), number(j, "theta")};
}

Server::Server(std::shared_ptr<Session> session)
    : session_(std::move(session)), http_(std::make_unique<httplib::Server>()) {
    routes();
}

Server::~Server() { stop(); }

bool Server::mount_static(const std::string& dir) { return http_->set_mount_point("/", dir); }

int Server::bind_any(const std::string& host) { return http_->bind_to_any_port(host); }
bool Server::bind(const std::string& host, int port) { return http_->bind_to_port(host, port); }
bool Server::listen_after_bind() { return http_->listen_after_bind(); }
void Server::stop() {
    if (http_->is_running()) http_->stop();
}
bool Server::running() const { return http_->is_running(); }
void Server::wait_until_ready() const { http_->wait_until_ready(); }

void Server::routes() {
    auto& s = *session_;
    auto& h = *http_;

    h.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });

    h.Get("/scenes", guarded([&s](const httplib::Request&, httplib::Response& res) {
              json list = json::array();
              for (const auto& id : s.scenes()) {
                  const auto st = s.state(id);
                  list.push_back({{"id", id}, {"clicks", st.clicks.size()}, {"annotations", st.annotations.size()}});
              }
              reply(res, 200, {{"scenes", list}, {"class", s.cls()}, {"detector", s.has_detector()}});
          }));

    h.Get(R"(/scenes/([^/]+)/bev)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
              const std::string id = req.matches[1];
              const auto r = s.raster(id);
              const auto& w = r.window;
              reply(res, 200,
                    {{"scene", id},
                     {"width", w.width()},
                     {"height", w.height()},
                     {"resolution", w.resolution},
                     {"x_min", w.x_min},
                     {"x_max", w.x_max},
                     {"z_min", w.z_min},
                     {"z_max", w.z_max},
                     // pixel (u, v) covers [x_min + u*res, +res) x (z_max - (v+1)*res, z_max - v*res]
                     {"mapping", {{"x", {w.x_min, w.resolution}}, {"z", {w.z_max, -w.resolution}}}},
                     {"layout", "row-major uint8, v * width + u"},
                     {"height_b64", encode(r.height)},
                     {"density_b64", encode(r.density)}});
          }));

    h.Get(R"(/scenes/([^/]+)/annotations)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
              const std::string id = req.matches[1];
              const auto st = s.state(id);
              json clicks = json::array();
              for (const auto& c : st.clicks) clicks.push_back({{"class", c.cls}, {"x", c.x}, {"z", c.z}});
              json anns = json::array();
              for (std::size_t k = 0; k < st.annotations.size(); ++k) {
                  const auto& a = st.annotations[k];
                  anns.push_back({{"index", k},
                                  {"class", a.cls},
                                  {"cuboid", cuboid_to_json(a.box)},
                                  {"corners", corners_json(a.box)},
                                  {"confidence", a.confidence}});
              }
              reply(res, 200, {{"scene", id}, {"clicks", clicks}, {"annotations", anns}});
          }));

    h.Post(R"(/scenes/([^/]+)/clicks)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               if (!s.has_scene(id)) throw UnknownScene("unknown scene '" + id + "'");
               const json body = json::parse(req.body);
               double x = 0.0;
               double z = 0.0;
               if (body.contains("u") || body.contains("v")) {
                   const Vec2 p = pixel_to_world(s.window(), number(body, "u"), number(body, "v"));
                   x = p.x;
                   z = p.z;
               } else {
                   x = number(body, "x");
                   z = number(body, "z");
               }
               const std::string mode = body.value("mode", std::string("active"));
               if (mode == "record") {
                   s.record_click(id, x, z);
                   reply(res, 200, {{"mode", mode}, {"click", {{"x", x}, {"z", z}}},
                                    {"clicks", s.state(id).clicks.size()}});
                   return;
               }
               if (mode != "active") throw Error("mode must be 'active' or 'record'");
               const auto r = s.active_click(id, x, z);
               json cands = json::array();
               for (std::size_t i = 0; i < r.candidates.size(); ++i) {
                   json c = {{"x", r.candidates[i].x}, {"z", r.candidates[i].z}, {"confidence", nullptr}};
                   if (r.candidate_conf[i]) c["confidence"] = *r.candidate_conf[i];
                   cands.push_back(c);
               }
               reply(res, 200,
                     {{"mode", mode},
                      {"click", {{"x", x}, {"z", z}}},
                      {"cuboid", cuboid_to_json(r.box)},
                      {"corners", corners_json(r.box)},
                      {"confidence", r.confidence},
                      {"candidates", cands}});
           }));

    h.Post(R"(/scenes/([^/]+)/accept)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               if (!s.has_scene(id)) throw UnknownScene("unknown scene '" + id + "'");
               const json body = json::parse(req.body);
               if (!body.contains("cuboid")) throw Error("missing field 'cuboid'");
               Annotation a;
               a.box = cuboid_from_json(body["cuboid"]);
               a.cls = kitti::canonical_class(body.value("class", s.cls()));
               a.confidence = body.contains("confidence") ? number(body, "confidence") : 1.0;
               try {
                   validate(a.box);
               } catch (const Error& e) {
                   fail(res, 400, "invalid_cuboid", e.what());
                   return;
               }
               const auto k = s.accept(id, a);
               reply(res, 200, {{"index", k}, {"cuboid", cuboid_to_json(a.box)}});
           }));

    h.Delete(R"(/scenes/([^/]+)/annotations/(\d+))",
             guarded([&s](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto k = static_cast<std::size_t>(std::stoull(req.matches[2]));
                 s.remove(id, k);
                 reply(res, 200, {{"deleted", k}, {"remaining", s.state(id).annotations.size()}});
             }));
}

}  // namespace ws3d::annotate
