#include "mgor/teleop_server.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <boost/beast/websocket.hpp>

#include "mgor/errors.hpp"
#include "mgor/io.hpp"

namespace mgor::teleop {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

json message(std::string_view type, json payload) {
    return json{{"type", type}, {"payload", std::move(payload)}};
}

bool safe_name(const std::string& name) {
    if (name.empty() || name.size() > 128) return false;
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
    }
    return name.find("..") == std::string::npos;
}

std::string mime_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

} // namespace

struct Server::Impl {
    ServerOptions opt;
    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    net::signal_set signals{ioc};
    std::map<std::string, json> recordings;

    explicit Impl(ServerOptions o) : opt(std::move(o)) {
        if (!(opt.cadence > 0.0) || !std::isfinite(opt.cadence)) throw ValidationError("serve: cadence must be > 0");
        if (!(opt.speedup > 0.0) || !std::isfinite(opt.speedup)) throw ValidationError("serve: speedup must be > 0");
        Session probe(opt.session, opt.scenario);  // rejects a bad scenario id up front
        (void)probe;
        tcp::endpoint ep(net::ip::make_address(opt.address), opt.port);
        acceptor.open(ep.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(ep);
        acceptor.listen();
    }

    json hello() const {
        return {{"command", "hello"},
                {"protocol_version", kProtocolVersion},
                {"limits", {{"max_speed", opt.session.limits.max_speed}, {"max_rate", opt.session.limits.max_rate}}},
                {"timestep", opt.session.params.timestep},
                {"cadence", opt.cadence},
                {"speedup", opt.speedup},
                {"scenario", opt.scenario},
                {"start_paused", opt.start_paused},
                {"scenarios", scenario_ids()}};
    }

    void store_recording(const std::string& name, const json& script) {
        recordings[name] = script;
        if (!opt.recordings_dir.empty() && safe_name(name)) {
            std::filesystem::create_directories(opt.recordings_dir);
            std::ofstream f(std::filesystem::path(opt.recordings_dir) / (name + ".json"));
            f << script.dump(2) << '\n';
            if (!f) std::cerr << "serve: could not write recording " << name << '\n';
        }
    }

    void accept();
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket socket, Server::Impl& server)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(server),
          session_(server.opt.session, server.opt.scenario), seen_recordings_(session_.recordings_finished()) {
        if (server.opt.start_paused) {
            session_.submit(Command::of(CommandType::Pause));
            session_.advance(0);
        }
    }

    void start(http::request<http::string_body> req) {
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->send(message("ack", self->server_.hello()));
            self->send(message("snapshot", encode(self->session_.snapshot())));
            self->read();
            self->last_tick_ = std::chrono::steady_clock::now();
            self->schedule();
        });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->close();
                return;
            }
            std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->handle(text);
            self->read();
        });
    }

    void handle(const std::string& text) {
        json seq = nullptr;
        try {
            const json envelope = json::parse(text);
            if (!envelope.is_object()) throw ValidationError("command: expected a JSON object");
            if (envelope.contains("client_seq")) seq = envelope["client_seq"];
            if (envelope.value("type", json()) == "hello") {
                json ack = server_.hello();
                ack["client_seq"] = seq;
                send(message("ack", ack));
                return;
            }
            std::optional<long> at_step;
            if (envelope.contains("at_step")) {
                if (!envelope["at_step"].is_number_integer()) throw ValidationError("command.at_step: expected an integer");
                at_step = envelope["at_step"].get<long>();
            }
            const Command cmd = decode_command(envelope);
            session_.submit(cmd, at_step);
            send(message("ack", {{"client_seq", seq}, {"command", to_string(cmd.type)}}));
        } catch (const json::exception& e) {
            send(message("error", {{"client_seq", seq}, {"message", std::string("malformed message: ") + e.what()}}));
        } catch (const std::exception& e) {
            send(message("error", {{"client_seq", seq}, {"message", e.what()}}));
        }
    }

    void schedule() {
        timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / server_.opt.cadence)));
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (ec || self->closed_) return;
            self->tick();
            self->schedule();
        });
    }

    void tick() {
        const auto now = std::chrono::steady_clock::now();
        const double wall = std::chrono::duration<double>(now - last_tick_).count();
        last_tick_ = now;
        // Simulated time follows wall time; a slow tick is not made up beyond one period.
        budget_ += server_.opt.speedup * std::min(wall, 2.0 / server_.opt.cadence) / server_.opt.session.params.timestep;
        const long steps = static_cast<long>(std::floor(budget_));
        budget_ -= static_cast<double>(steps);
        if (session_.paused()) budget_ = 0.0;

        for (const auto& err : session_.advance(steps)) {
            send(message("error", {{"client_seq", nullptr}, {"message", err}}));
        }
        if (session_.recordings_finished() != seen_recordings_) {
            seen_recordings_ = session_.recordings_finished();
            const auto& script = *session_.last_recording();
            const json j = io::encode(script);
            server_.store_recording(script.name, j);
            send(message("ack", {{"command", "recording_saved"}, {"name", script.name}, {"script", j}}));
        }
        // A client that stops reading does not grow the queue without bound.
        if (queue_.size() < 64) send(message("snapshot", encode(session_.snapshot())));
    }

    void send(const json& msg) {
        if (closed_) return;
        queue_.push_back(msg.dump());
        if (!writing_) write();
    }

    void write() {
        writing_ = true;
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->close();
                return;
            }
            self->queue_.pop_front();
            if (self->queue_.empty()) {
                self->writing_ = false;
            } else {
                self->write();
            }
        });
    }

    void close() {
        closed_ = true;
        timer_.cancel();
    }

    websocket::stream<tcp::socket> ws_;
    net::steady_timer timer_;
    Server::Impl& server_;
    Session session_;
    long seen_recordings_ = 0;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    bool writing_ = false;
    bool closed_ = false;
    double budget_ = 0.0;
    std::chrono::steady_clock::time_point last_tick_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

    void start() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (websocket::is_upgrade(self->req_)) {
                self->stream_.expires_never();
                std::make_shared<WsConnection>(self->stream_.release_socket(), self->server_)
                    ->start(std::move(self->req_));
                return;
            }
            self->respond();
        });
    }

private:
    void respond() {
        auto res = std::make_shared<http::response<http::string_body>>();
        res->version(req_.version());
        res->keep_alive(false);
        res->set(http::field::server, "mgor-teleop");
        const std::string target(req_.target());
        const std::string path = target.substr(0, target.find('?'));

        auto reply = [&](http::status status, std::string type, std::string body) {
            res->result(status);
            res->set(http::field::content_type, type);
            res->body() = std::move(body);
        };

        if (req_.method() != http::verb::get) {
            reply(http::status::method_not_allowed, "text/plain", "GET only\n");
        } else if (path == "/recordings") {
            json names = json::array();
            for (const auto& [name, _] : server_.recordings) names.push_back(name);
            reply(http::status::ok, "application/json", names.dump() + "\n");
        } else if (path.rfind("/recordings/", 0) == 0) {
            std::string name = path.substr(12);
            if (name.size() > 5 && name.ends_with(".json")) name.resize(name.size() - 5);
            auto it = server_.recordings.find(name);
            if (it == server_.recordings.end()) {
                reply(http::status::not_found, "text/plain", "no such recording\n");
            } else {
                reply(http::status::ok, "application/json", it->second.dump(2) + "\n");
            }
        } else if (path == "/protocol") {
            reply(http::status::ok, "application/json", server_.hello().dump(2) + "\n");
        } else if (!server_.opt.static_dir.empty() && path.find("..") == std::string::npos) {
            std::filesystem::path file = std::filesystem::path(server_.opt.static_dir) /
                                         (path == "/" ? std::string("index.html") : path.substr(1));
            std::ifstream in(file, std::ios::binary);
            if (!in || std::filesystem::is_directory(file)) {
                reply(http::status::not_found, "text/plain", "not found\n");
            } else {
                std::ostringstream body;
                body << in.rdbuf();
                reply(http::status::ok, mime_type(file), body.str());
            }
        } else {
            reply(http::status::not_found, "text/plain", "not found\n");
        }
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    Server::Impl& server_;
};

} // namespace

void Server::Impl::accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (!acceptor.is_open()) return;
        if (!ec) std::make_shared<HttpConnection>(std::move(socket), *this)->start();
        accept();
    });
}

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run(bool handle_signals) {
    if (handle_signals) {
        impl_->signals.add(SIGINT);
        impl_->signals.add(SIGTERM);
        impl_->signals.async_wait([this](beast::error_code ec, int) {
            if (!ec) stop();
        });
    }
    impl_->accept();
    impl_->ioc.run();
}

void Server::stop() {
    net::post(impl_->ioc, [impl = impl_.get()] {
        beast::error_code ignored;
        impl->acceptor.close(ignored);
        impl->signals.cancel(ignored);
        impl->ioc.stop();
    });
}

const std::map<std::string, json>& Server::recordings() const { return impl_->recordings; }

} // namespace mgor::teleop
