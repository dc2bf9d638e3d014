#include "server.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "error.hpp"
#include "session.hpp"

namespace mpl {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxQueuedFrames = 256;

class Closable {
public:
    virtual ~Closable() = default;
    virtual void shutdown() = 0;
};

}  // namespace

std::string mime_type(const std::string &path) {
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json" || ext == ".map") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    if (ext == ".txt") return "text/plain; charset=utf-8";
    return "application/octet-stream";
}

struct Server::Impl : std::enable_shared_from_this<Server::Impl> {
    ServerConfig cfg;
    Checkpoint checkpoint;
    Scenario scenario;
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    asio::signal_set signals{ioc};
    std::mutex mutex;
    std::vector<std::weak_ptr<Closable>> live;
    std::atomic<int> next_session{0};
    std::atomic<bool> stopping{false};

    void accept();
    void track(const std::shared_ptr<Closable> &c) {
        std::lock_guard lock(mutex);
        std::erase_if(live, [](const auto &w) { return w.expired(); });
        live.push_back(c);
    }
    void stop();
    http::response<http::string_body> serve_file(const http::request<http::string_body> &req) const;
};

namespace {

class WsSession : public Closable, public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, std::shared_ptr<Server::Impl> server, Session session)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(std::move(server)), session_(std::move(session)) {
        const double seconds = server_->scenario.flock.dt / server_->cfg.speedup;
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(seconds));
    }

    void start(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

    void shutdown() override {
        asio::dispatch(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closing_) return;
            self->closing_ = true;
            self->timer_.cancel();
            self->enqueue(self->session_.shutdown_message().dump(), false);
        });
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        for (const auto &m : session_.opening_messages()) enqueue(m.dump(), false);
        read();
        next_tick_ = std::chrono::steady_clock::now() + interval_;
        arm();
    }

    void arm() {
        if (closing_) return;
        timer_.expires_at(next_tick_);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
    }

    void on_tick(beast::error_code ec) {
        if (ec || closing_) return;
        if (session_.tick()) enqueue(session_.frame().dump(), true);
        next_tick_ += interval_;
        const auto now = std::chrono::steady_clock::now();
        if (next_tick_ < now) next_tick_ = now;
        arm();
    }

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            closing_ = true;
            timer_.cancel();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        if (!closing_) {
            for (const auto &m : session_.handle_text(text)) enqueue(m.dump(), false);
        }
        read();
    }

    void enqueue(std::string text, bool droppable) {
        if (droppable && outbox_.size() >= kMaxQueuedFrames) return;
        outbox_.push_back(std::move(text));
        if (!writing_) write();
    }

    void write() {
        writing_ = true;
        ws_.text(true);
        ws_.async_write(asio::buffer(outbox_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
    }

    void on_write(beast::error_code ec) {
        writing_ = false;
        if (ec) {
            closing_ = true;
            timer_.cancel();
            return;
        }
        outbox_.pop_front();
        if (!outbox_.empty()) {
            write();
        } else if (closing_) {
            ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    asio::steady_timer timer_;
    std::shared_ptr<Server::Impl> server_;
    Session session_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    bool writing_ = false;
    bool closing_ = false;
    std::chrono::steady_clock::duration interval_{};
    std::chrono::steady_clock::time_point next_tick_{};
};

class HttpConnection : public Closable, public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket socket, std::shared_ptr<Server::Impl> server)
        : stream_(std::move(socket)), server_(std::move(server)) {}

    void start() { read(); }

    void shutdown() override {
        asio::dispatch(stream_.get_executor(), [self = shared_from_this()] {
            beast::error_code ec;
            self->stream_.socket().shutdown(tcp::socket::shutdown_both, ec);
            self->stream_.close();
        });
    }

private:
    void read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) return;
        if (websocket::is_upgrade(req_)) {
            if (server_->stopping) return;
            stream_.expires_never();
            const int n = ++server_->next_session;
            Session session("s" + std::to_string(n), server_->checkpoint, server_->scenario, server_->cfg.seed,
                            server_->cfg.runtime);
            auto ws = std::make_shared<WsSession>(stream_.release_socket(), server_, std::move(session));
            server_->track(ws);
            ws->start(std::move(req_));
            return;
        }
        auto res = std::make_shared<http::response<http::string_body>>(server_->serve_file(req_));
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (res->need_eof()) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->read();
        });
    }

    beast::tcp_stream stream_;
    std::shared_ptr<Server::Impl> server_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

}  // namespace

http::response<http::string_body> Server::Impl::serve_file(const http::request<http::string_body> &req) const {
    auto reply = [&](http::status status, std::string body, const std::string &type) {
        http::response<http::string_body> res{status, req.version()};
        res.set(http::field::server, "mpl");
        res.set(http::field::content_type, type);
        res.keep_alive(req.keep_alive());
        res.body() = std::move(body);
        res.prepare_payload();
        return res;
    };
    if (req.method() != http::verb::get && req.method() != http::verb::head)
        return reply(http::status::method_not_allowed, "method not allowed\n", "text/plain");

    std::string target(req.target());
    target = target.substr(0, target.find_first_of("?#"));
    if (target.empty() || target[0] != '/' || target.find("..") != std::string::npos)
        return reply(http::status::bad_request, "bad path\n", "text/plain");
    if (target.back() == '/') target += "index.html";
    if (cfg.ui_dir.empty()) return reply(http::status::not_found, "not found\n", "text/plain");

    const std::filesystem::path path = std::filesystem::path(cfg.ui_dir) / target.substr(1);
    std::ifstream in(path, std::ios::binary);
    if (!in || std::filesystem::is_directory(path)) return reply(http::status::not_found, "not found\n", "text/plain");
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto res = reply(http::status::ok, std::move(body), mime_type(path.string()));
    if (req.method() == http::verb::head) {
        const auto size = res.body().size();
        res.body().clear();
        res.content_length(size);
    }
    return res;
}

void Server::Impl::accept() {
    acceptor.async_accept(asio::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket s) {
        if (ec) return;  // acceptor closed
        auto conn = std::make_shared<HttpConnection>(std::move(s), self);
        self->track(conn);
        conn->start();
        self->accept();
    });
}

void Server::Impl::stop() {
    if (stopping.exchange(true)) return;
    asio::post(ioc, [self = shared_from_this()] {
        beast::error_code ec;
        self->acceptor.close(ec);
        self->signals.cancel(ec);
        std::vector<std::shared_ptr<Closable>> open;
        {
            std::lock_guard lock(self->mutex);
            for (auto &w : self->live)
                if (auto c = w.lock()) open.push_back(std::move(c));
            self->live.clear();
        }
        for (auto &c : open) c->shutdown();
    });
}

Server::Server(const ServerConfig &cfg) : impl_(std::make_shared<Impl>()) {
    impl_->cfg = cfg;
    if (!(cfg.speedup > 0.0)) throw Error(ErrorCode::InvalidArgument, "speedup must be positive");
    cfg.runtime.validate();
    impl_->checkpoint = load_checkpoint(cfg.checkpoint_path);
    impl_->scenario = load_scenario(cfg.scenario_path);
    // A throwaway session catches scenario/model mismatches before binding.
    Session probe("probe", impl_->checkpoint, impl_->scenario, cfg.seed, cfg.runtime);

    beast::error_code ec;
    const auto address = asio::ip::make_address(cfg.host, ec);
    if (ec) throw Error(ErrorCode::InvalidArgument, "invalid host '" + cfg.host + "'");
    const tcp::endpoint endpoint{address, cfg.port};
    auto &acc = impl_->acceptor;
    acc.open(endpoint.protocol(), ec);
    if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(endpoint, ec);
    if (ec == asio::error::address_in_use)
        throw Error(ErrorCode::PortInUse, "port " + std::to_string(cfg.port) + " is already in use");
    if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port) + ": " + ec.message());
}

Server::~Server() {
    if (impl_) {
        beast::error_code ec;
        impl_->acceptor.close(ec);
    }
}

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
    auto impl = impl_;
    if (impl->cfg.handle_signals) {
        impl->signals.add(SIGINT);
        impl->signals.add(SIGTERM);
        impl->signals.async_wait([impl](beast::error_code ec, int) {
            if (!ec) impl->stop();
        });
    }
    impl->accept();
    std::vector<std::jthread> extra;
    for (unsigned t = 1; t < std::max(1u, impl->cfg.threads); ++t) extra.emplace_back([impl] { impl->ioc.run(); });
    impl->ioc.run();
}

void Server::stop() { impl_->stop(); }

}  // namespace mpl
