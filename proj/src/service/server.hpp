#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "adaptation.hpp"

namespace mpl {

struct ServerConfig {
    std::string checkpoint_path;
    std::string scenario_path;
    std::string ui_dir;  // static files; empty disables them
    std::string host = "127.0.0.1";
    unsigned short port = 8765;  // 0 picks a free port
    double speedup = 1.0;        // simulated seconds per wall second
    std::uint64_t seed = 0;
    RuntimeConfig runtime;
    unsigned threads = 2;
    bool handle_signals = false;  // stop on SIGINT/SIGTERM
};

/// WebSocket steering service plus static file host on one port. The
/// constructor loads the checkpoint and scenario and binds the socket, so
/// configuration errors surface before run().
class Server {
public:
    explicit Server(const ServerConfig &cfg);
    ~Server();
    Server(const Server &) = delete;
    Server &operator=(const Server &) = delete;

    unsigned short port() const;
    /// Blocks until stop() and all connections have closed.
    void run();
    /// Thread-safe. Live sessions get a server_shutdown message, then close.
    void stop();

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

std::string mime_type(const std::string &path);

}  // namespace mpl
