#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "error.hpp"
#include "server.hpp"

using namespace mpl;
using nlohmann::json;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

struct Fixture {
    std::filesystem::path dir;
    ServerConfig cfg;

    Fixture() {
        dir = std::filesystem::temp_directory_path() / ("mpl_server_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir / "ui");
        save_checkpoint({init_params(kDefaultLayerDims, 5), "maml", 5, ""}, (dir / "model.json").string());
        std::ofstream(dir / "ui" / "index.html") << "<!doctype html><title>console</title>\n";
        std::ofstream(dir / "ui" / "app.js") << "console.log(1);\n";
        cfg.checkpoint_path = (dir / "model.json").string();
        cfg.scenario_path = std::string(MPL_DATA_DIR) + "/earthquake_site.json";
        cfg.ui_dir = (dir / "ui").string();
        cfg.port = 0;
        cfg.speedup = 5.0;
    }
    ~Fixture() { std::filesystem::remove_all(dir); }
};

// Server running on a background thread for the lifetime of the object.
struct Running {
    Server server;
    std::thread thread;

    explicit Running(const ServerConfig &cfg) : server(cfg), thread([this] { server.run(); }) {}
    ~Running() {
        server.stop();
        thread.join();
    }
};

class Client {
public:
    explicit Client(unsigned short port) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/");
    }

    json read() {
        beast::flat_buffer buf;
        ws_.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }

    // Skips frames until a message of the given type arrives.
    json read_until(const std::string &type) {
        for (;;) {
            auto m = read();
            if (m["type"] == type) return m;
        }
    }

    void send(const json &j) { ws_.write(asio::buffer(j.dump())); }
    void send_text(const std::string &s) { ws_.write(asio::buffer(s)); }

    websocket::stream<tcp::socket> &ws() { return ws_; }

private:
    asio::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

http::response<http::string_body> http_get(unsigned short port, const std::string &target) {
    asio::io_context ioc;
    tcp::socket sock(ioc);
    tcp::resolver resolver(ioc);
    asio::connect(sock, resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::string_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    req.keep_alive(false);
    http::write(sock, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(sock, buf, res);
    return res;
}

json speed_up() {
    return {{"type", "instruction"}, {"ins", {{"inner", 0}, {"height", 0}, {"speed", 1}, {"safety", 0}}}};
}

}  // namespace

TEST_CASE("client receives hello, arena and the first frame") {
    Fixture fx;
    Running srv(fx.cfg);
    CHECK(srv.server.port() != 0);
    Client c(srv.server.port());
    auto hello = c.read();
    CHECK(hello["type"] == "hello");
    CHECK(hello["schema_version"] == "1");
    CHECK(hello["algo"] == "maml");
    auto arena = c.read();
    CHECK(arena["type"] == "arena");
    CHECK(arena["session_id"] == hello["session_id"]);
    auto frame = c.read();
    CHECK(frame["type"] == "frame");
    CHECK(frame["step"] == 0);
    CHECK(frame.contains("arena"));
    // Frames keep coming with increasing steps.
    int last = 0;
    for (int k = 0; k < 5; ++k) {
        auto f = c.read_until("frame");
        CHECK(f["step"].get<int>() > last);
        last = f["step"];
    }
}

TEST_CASE("three speed-ups raise the acknowledged speed each time") {
    Fixture fx;
    Running srv(fx.cfg);
    Client c(srv.server.port());
    const double initial = c.read_until("frame")["H_hat"]["speed"];
    double last = -1.0;
    for (int k = 0; k < 3; ++k) {
        c.send(speed_up());
        auto ack = c.read_until("ack");
        CHECK(ack["updated"] == true);
        const double speed = ack["H_hat"]["speed"];
        CHECK(speed > last);
        if (k == 0) CHECK(speed > initial);
        last = speed;
    }
    auto after = c.read_until("frame");
    CHECK(after["H_hat"]["speed"].get<double>() > initial);
    CHECK(after["phase_active"] == true);
}

TEST_CASE("each client gets its own session") {
    Fixture fx;
    Running srv(fx.cfg);
    Client a(srv.server.port());
    Client b(srv.server.port());
    const auto ia = a.read()["session_id"].get<std::string>();
    const auto ib = b.read()["session_id"].get<std::string>();
    CHECK(ia != ib);
    a.send(speed_up());
    CHECK(a.read_until("ack")["session_id"] == ia);
    // b's model is untouched: its next frame shows no phase.
    auto fb = b.read_until("frame");
    CHECK(fb["session_id"] == ib);
    CHECK(fb["metrics"]["n_phases"] == 0);
}

TEST_CASE("invalid instruction gets an error and the session stays open") {
    Fixture fx;
    Running srv(fx.cfg);
    Client c(srv.server.port());
    c.send({{"type", "instruction"}, {"ins", {{"inner", 0}, {"height", 0}, {"speed", 2}, {"safety", 0}}}});
    auto err = c.read_until("error");
    CHECK(err["message"] == "invalid instruction");
    c.send_text("not json");
    CHECK(c.read_until("error")["message"] == "malformed message");
    c.send(speed_up());
    CHECK(c.read_until("ack")["updated"] == true);
}

TEST_CASE("pause holds the step counter until resume") {
    Fixture fx;
    Running srv(fx.cfg);
    Client c(srv.server.port());
    c.read_until("frame");
    c.send({{"type", "pause"}});
    auto paused = c.read_until("ack");
    CHECK(paused["command"] == "pause");
    const int held = paused["step"];
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    c.send({{"type", "resume"}});
    // Nothing but the resume ack arrives while paused.
    auto next = c.read();
    CHECK(next["type"] == "ack");
    CHECK(next["command"] == "resume");
    CHECK(next["step"] == held);
    auto f = c.read_until("frame");
    CHECK(f["step"] == held + 1);
}

TEST_CASE("reset restarts the session at step zero") {
    Fixture fx;
    Running srv(fx.cfg);
    Client c(srv.server.port());
    const auto id = c.read()["session_id"];
    c.read_until("frame");
    c.read_until("frame");
    c.send({{"type", "reset"}});
    auto ack = c.read_until("ack");
    CHECK(ack["command"] == "reset");
    CHECK(c.read()["type"] == "arena");
    auto f = c.read();
    CHECK(f["type"] == "frame");
    CHECK(f["step"] == 0);
    CHECK(f["session_id"] == id);
}

TEST_CASE("static files share the port") {
    Fixture fx;
    Running srv(fx.cfg);
    auto index = http_get(srv.server.port(), "/");
    CHECK(index.result() == http::status::ok);
    CHECK(index[http::field::content_type] == "text/html; charset=utf-8");
    CHECK(index.body().find("console") != std::string::npos);
    auto js = http_get(srv.server.port(), "/app.js?v=2");
    CHECK(js.result() == http::status::ok);
    CHECK(js[http::field::content_type] == "text/javascript; charset=utf-8");
    CHECK(http_get(srv.server.port(), "/missing.css").result() == http::status::not_found);
    CHECK(http_get(srv.server.port(), "/../model.json").result() == http::status::bad_request);
}

TEST_CASE("without a UI directory every path is 404") {
    Fixture fx;
    fx.cfg.ui_dir.clear();
    Running srv(fx.cfg);
    CHECK(http_get(srv.server.port(), "/").result() == http::status::not_found);
}

TEST_CASE("stop notifies live sessions") {
    Fixture fx;
    Server server(fx.cfg);
    std::thread t([&] { server.run(); });
    Client c(server.port());
    c.read_until("frame");
    server.stop();
    auto bye = c.read_until("server_shutdown");
    CHECK(bye["schema_version"] == "1");
    beast::flat_buffer buf;
    beast::error_code ec;
    c.ws().read(buf, ec);
    CHECK(ec == websocket::error::closed);
    t.join();
}

TEST_CASE("a taken port is reported") {
    Fixture fx;
    Running first(fx.cfg);
    auto cfg = fx.cfg;
    cfg.port = first.server.port();
    try {
        Server second(cfg);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::PortInUse);
    }
}

TEST_CASE("bad configuration fails before serving") {
    Fixture fx;
    auto cfg = fx.cfg;
    cfg.checkpoint_path = "/nonexistent/model.json";
    CHECK_THROWS_AS(Server{cfg}, Error);
    cfg = fx.cfg;
    cfg.speedup = 0;
    CHECK_THROWS_AS(Server{cfg}, Error);
}

TEST_CASE("mime types") {
    CHECK(mime_type("a/index.html") == "text/html; charset=utf-8");
    CHECK(mime_type("x.css") == "text/css; charset=utf-8");
    CHECK(mime_type("x.json") == "application/json");
    CHECK(mime_type("x.svg") == "image/svg+xml");
    CHECK(mime_type("x.bin") == "application/octet-stream");
}
