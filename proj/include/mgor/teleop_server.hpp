#pragma once

#include <map>
#include <memory>
#include <string>

#include "mgor/teleop.hpp"

namespace mgor::teleop {

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8090;  // 0 picks a free port
    double cadence = 30.0;       // snapshots per second
    double speedup = 1.0;        // simulated seconds per wall second
    std::string scenario = "beta";
    bool start_paused = false;   // each new session waits for a resume command
    SessionOptions session = default_session_options();
    std::string recordings_dir;  // when set, finished recordings are also written here
    std::string static_dir;      // when set, GET requests outside /recordings serve files from it
};

/// WebSocket teleoperation service. One Session per connection; everything runs on
/// the thread that calls run().
class Server {
public:
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    unsigned short port() const;
    /// Blocks until stop() or SIGINT/SIGTERM (when `handle_signals`).
    void run(bool handle_signals = false);
    /// Safe to call from any thread.
    void stop();

    /// Recordings finished on any connection, by name, as script JSON.
    const std::map<std::string, nlohmann::json>& recordings() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

} // namespace mgor::teleop
