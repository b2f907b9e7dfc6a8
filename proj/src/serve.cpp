#include "navlab/serve.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "navlab/random.hpp"
#include "navlab/scene_io.hpp"

namespace navlab::serve {

using json = nlohmann::json;

std::string_view error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Malformed: return "malformed";
        case ErrorKind::OutOfOrder: return "out_of_order";
        case ErrorKind::Truncated: return "truncated";
        case ErrorKind::Oversize: return "oversize";
        case ErrorKind::Internal: return "internal";
    }
    return "";
}

std::optional<ErrorKind> parse_error_kind(std::string_view name) {
    for (ErrorKind k : {ErrorKind::Malformed, ErrorKind::OutOfOrder, ErrorKind::Truncated, ErrorKind::Oversize,
                        ErrorKind::Internal}) {
        if (error_kind_name(k) == name) return k;
    }
    return std::nullopt;
}

ProtocolError::ProtocolError(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

std::int64_t monotonic_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

json to_json(const ObservationFrame& f) {
    json j{{"session_id", f.session_id},
           {"step", f.step},
           {"observation", f.observation},
           {"client_send_time", f.client_send_time}};
    if (f.instruction) j["instruction"] = *f.instruction;
    return j;
}

json to_json(const ActionFrame& f) {
    json actions = json::array();
    for (env::Action a : f.actions) actions.push_back(env::action_name(a));
    return {{"session_id", f.session_id},
            {"step", f.step},
            {"actions", actions},
            {"latent_step", f.latent_step},
            {"server_receive_time", f.server_receive_time},
            {"server_send_time", f.server_send_time}};
}

json to_json(const ErrorFrame& f) {
    json j{{"error", error_kind_name(f.kind)}, {"message", f.message}};
    if (f.session_id) j["session_id"] = *f.session_id;
    if (f.step) j["step"] = *f.step;
    return j;
}

std::string encode_frame(std::string_view payload) {
    if (payload.size() > kMaxPayload) throw std::invalid_argument("payload exceeds the frame limit");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out.append(payload);
    return out;
}

std::string encode(const ObservationFrame& f) { return encode_frame(to_json(f).dump()); }
std::string encode(const ActionFrame& f) { return encode_frame(to_json(f).dump()); }
std::string encode(const ErrorFrame& f) { return encode_frame(to_json(f).dump()); }

namespace {

json parse_object(std::string_view payload) {
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded()) throw ProtocolError(ErrorKind::Malformed, "payload is not JSON");
    if (!j.is_object()) throw ProtocolError(ErrorKind::Malformed, "payload is not a JSON object");
    return j;
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ProtocolError(ErrorKind::Malformed, std::string("missing field ") + name);
    return *it;
}

std::string string_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) throw ProtocolError(ErrorKind::Malformed, std::string(name) + " must be a string");
    return v.get<std::string>();
}

std::uint64_t count_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ProtocolError(ErrorKind::Malformed, std::string(name) + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::int64_t time_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_integer()) throw ProtocolError(ErrorKind::Malformed, std::string(name) + " must be an integer");
    return v.get<std::int64_t>();
}

double finite_number(const json& v, const char* name) {
    if (!v.is_number()) throw ProtocolError(ErrorKind::Malformed, std::string(name) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ProtocolError(ErrorKind::Malformed, std::string(name) + " must be finite");
    return x;
}

env::Observation observation_field(const json& j) {
    const json& o = field(j, "observation");
    if (!o.is_object()) throw ProtocolError(ErrorKind::Malformed, "observation must be an object");
    const json& rays = field(o, "depth_rays");
    if (!rays.is_array() || rays.empty()) throw ProtocolError(ErrorKind::Malformed, "depth_rays must be a non-empty array");
    env::Observation obs;
    for (const json& r : rays) {
        const double d = finite_number(r, "depth_rays");
        if (d < 0.0) throw ProtocolError(ErrorKind::Malformed, "depth_rays must be non-negative");
        obs.depth_rays.push_back(d);
    }
    obs.goal_bearing = finite_number(field(o, "goal_bearing"), "goal_bearing");
    obs.goal_distance = finite_number(field(o, "goal_distance"), "goal_distance");
    obs.step_fraction = finite_number(field(o, "step_fraction"), "step_fraction");
    return obs;
}

}  // namespace

ObservationFrame decode_observation(std::string_view payload) {
    const json j = parse_object(payload);
    ObservationFrame f;
    f.session_id = string_field(j, "session_id");
    if (f.session_id.empty()) throw ProtocolError(ErrorKind::Malformed, "session_id must be non-empty");
    f.step = count_field(j, "step");
    f.observation = observation_field(j);
    f.client_send_time = time_field(j, "client_send_time");
    if (j.contains("instruction")) f.instruction = string_field(j, "instruction");
    return f;
}

Response decode_response(std::string_view payload) {
    const json j = parse_object(payload);
    if (j.contains("error")) {
        ErrorFrame e;
        const auto kind = parse_error_kind(string_field(j, "error"));
        if (!kind) throw ProtocolError(ErrorKind::Malformed, "unknown error kind");
        e.kind = *kind;
        e.message = string_field(j, "message");
        if (j.contains("session_id")) e.session_id = string_field(j, "session_id");
        if (j.contains("step")) e.step = count_field(j, "step");
        return e;
    }
    ActionFrame f;
    f.session_id = string_field(j, "session_id");
    f.step = count_field(j, "step");
    const json& actions = field(j, "actions");
    if (!actions.is_array()) throw ProtocolError(ErrorKind::Malformed, "actions must be an array");
    for (const json& a : actions) {
        if (!a.is_string()) throw ProtocolError(ErrorKind::Malformed, "action names must be strings");
        const auto act = env::parse_action(a.get<std::string>());
        if (!act) throw ProtocolError(ErrorKind::Malformed, "unknown action " + a.get<std::string>());
        f.actions.push_back(*act);
    }
    f.latent_step = count_field(j, "latent_step");
    f.server_receive_time = time_field(j, "server_receive_time");
    f.server_send_time = time_field(j, "server_send_time");
    return f;
}

void FrameReader::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameReader::next() {
    if (buffer_.size() < 4) return std::nullopt;
    const auto* b = reinterpret_cast<const unsigned char*>(buffer_.data());
    const std::size_t n = (std::size_t{b[0]} << 24) | (std::size_t{b[1]} << 16) | (std::size_t{b[2]} << 8) | b[3];
    if (n > kMaxPayload) throw ProtocolError(ErrorKind::Oversize, "length prefix " + std::to_string(n));
    if (buffer_.size() < 4 + n) return std::nullopt;
    std::string payload = buffer_.substr(4, n);
    buffer_.erase(0, 4 + n);
    return payload;
}

LatencyReport latency_report(std::span<const LatencySample> samples) {
    if (samples.empty()) throw std::invalid_argument("latency report needs at least one sample");
    std::vector<double> rt;
    rt.reserve(samples.size());
    for (const LatencySample& s : samples) rt.push_back(static_cast<double>(s.round_trip));
    std::sort(rt.begin(), rt.end());
    const auto rank = [&](double p) {
        const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(rt.size())));
        return rt[std::clamp<std::size_t>(k, 1, rt.size()) - 1];
    };
    LatencyReport r;
    r.count = rt.size();
    double sum = 0.0;
    for (double x : rt) sum += x;
    r.mean = sum / static_cast<double>(rt.size());
    r.p50 = rank(0.50);
    r.p95 = rank(0.95);
    r.max = rt.back();
    return r;
}

json to_json(const LatencySample& s) {
    return {{"round_trip", s.round_trip}, {"server_compute", s.server_compute}};
}

json to_json(const LatencyReport& r) {
    return {{"count", r.count}, {"mean", r.mean}, {"p50", r.p50}, {"p95", r.p95}, {"max", r.max}};
}

std::string render_latency_table(std::span<const LatencyRow> rows) {
    std::size_t wm = 6, wl = 8;
    for (const LatencyRow& r : rows) {
        wm = std::max(wm, r.method.size());
        wl = std::max(wl, r.location.size());
    }
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %8s  %10s  %10s  %10s  %10s\n", static_cast<int>(wm), "Method",
                  static_cast<int>(wl), "Location", "frames", "mean (ms)", "p50 (ms)", "p95 (ms)", "max (ms)");
    out << buf;
    for (const LatencyRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %-*s  %8zu  %10.3f  %10.3f  %10.3f  %10.3f\n", static_cast<int>(wm),
                      r.method.c_str(), static_cast<int>(wl), r.location.c_str(), r.report.count, r.report.mean / 1e6,
                      r.report.p50 / 1e6, r.report.p95 / 1e6, r.report.max / 1e6);
        out << buf;
    }
    return out.str();
}

void write_samples_jsonl(const std::filesystem::path& path, std::span<const LatencySample> samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const LatencySample& s : samples) out << to_json(s).dump() << '\n';
}

std::uint64_t session_seed(std::uint64_t server_seed, std::string_view session_id) {
    return mix_seed(server_seed, {fnv1a64("session"), fnv1a64(session_id)});
}

namespace {

// Writes all bytes; false when the peer is gone.
bool write_all(int fd, std::string_view bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t k = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (k < 0 && errno == EINTR) continue;
        if (k <= 0) return false;
        sent += static_cast<std::size_t>(k);
    }
    return true;
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

struct Server::Impl {
    policy::FisPolicy model;
    policy::ParamVector params;
    ServerConfig cfg;
    int listen_fd = -1;
    int bound_port = 0;
    std::atomic<bool> running{false};
    std::thread acceptor;
    std::mutex conn_mutex;
    std::vector<std::thread> workers;
    std::vector<int> conn_fds;
    std::atomic<std::size_t> served{0};
    std::atomic<std::size_t> errors{0};
    std::atomic<std::size_t> responses{0};

    Impl(const policy::FisPolicy& m, policy::ParamVector p, ServerConfig c)
        : model(m), params(std::move(p)), cfg(std::move(c)) {}

    struct Session {
        fis::Controller controller;
        std::optional<std::uint64_t> last_step;
    };

    void accept_loop() {
        while (running) {
            pollfd p{listen_fd, POLLIN, 0};
            const int r = ::poll(&p, 1, 100);
            if (r <= 0) continue;
            const int fd = ::accept(listen_fd, nullptr, nullptr);
            if (fd < 0) continue;
            set_nodelay(fd);
            std::lock_guard lock(conn_mutex);
            if (!running) {
                ::close(fd);
                break;
            }
            conn_fds.push_back(fd);
            workers.emplace_back([this, fd] { connection_loop(fd); });
        }
    }

    bool respond(int fd, const std::string& bytes) {
        const std::size_t k = responses++;
        if (!cfg.delays.empty()) std::this_thread::sleep_for(cfg.delays[k % cfg.delays.size()]);
        return write_all(fd, bytes);
    }

    bool reject(int fd, ErrorKind kind, const std::string& message, std::optional<std::string> session = std::nullopt,
                std::optional<std::uint64_t> step = std::nullopt) {
        ++errors;
        return respond(fd, encode(ErrorFrame{kind, message, std::move(session), step}));
    }

    bool handle(int fd, std::map<std::string, Session>& sessions, const std::string& payload,
                std::int64_t received) {
        ObservationFrame frame;
        try {
            frame = decode_observation(payload);
        } catch (const ProtocolError& e) {
            std::optional<std::string> sid;
            std::optional<std::uint64_t> step;
            const json j = json::parse(payload, nullptr, false);
            if (j.is_object()) {
                if (j.contains("session_id") && j["session_id"].is_string()) sid = j["session_id"].get<std::string>();
                if (j.contains("step") && j["step"].is_number_unsigned()) step = j["step"].get<std::uint64_t>();
            }
            return reject(fd, e.kind(), e.what(), sid, step);
        }
        auto it = sessions.find(frame.session_id);
        if (it == sessions.end()) {
            fis::Controller c(model, params, cfg.fis, frame.instruction.value_or(""),
                              session_seed(cfg.seed, frame.session_id), cfg.greedy);
            it = sessions.emplace(frame.session_id, Session{std::move(c), std::nullopt}).first;
        }
        Session& s = it->second;
        if (s.last_step && frame.step <= *s.last_step) {
            return reject(fd, ErrorKind::OutOfOrder,
                          "step " + std::to_string(frame.step) + " after " + std::to_string(*s.last_step),
                          frame.session_id, frame.step);
        }
        ActionFrame out;
        try {
            const fis::Controller::Chunk chunk = s.controller.on_observation(frame.observation, frame.step);
            out.actions = chunk.actions;
            out.latent_step = chunk.latent_step;
        } catch (const policy::ShapeMismatch& e) {
            return reject(fd, ErrorKind::Malformed, e.what(), frame.session_id, frame.step);
        } catch (const std::exception& e) {
            return reject(fd, ErrorKind::Internal, e.what(), frame.session_id, frame.step);
        }
        s.last_step = frame.step;
        out.session_id = frame.session_id;
        out.step = frame.step;
        out.server_receive_time = received;
        out.server_send_time = monotonic_ns();
        ++served;
        return respond(fd, encode(out));
    }

    void connection_loop(int fd) {
        std::map<std::string, Session> sessions;
        FrameReader reader;
        char buf[65536];
        std::int64_t frame_start = 0;
        while (running) {
            const int wait_ms = reader.buffered() == 0 ? 100 : static_cast<int>(cfg.truncation_timeout.count());
            pollfd p{fd, POLLIN, 0};
            const int r = ::poll(&p, 1, wait_ms);
            if (r < 0 && errno == EINTR) continue;
            if (r < 0) break;
            if (r == 0) {
                if (reader.buffered() != 0) {
                    reader.clear();
                    if (!reject(fd, ErrorKind::Truncated, "incomplete frame dropped")) break;
                }
                continue;
            }
            const ssize_t k = ::recv(fd, buf, sizeof buf, 0);
            if (k < 0 && errno == EINTR) continue;
            if (k <= 0) break;
            if (reader.buffered() == 0) frame_start = monotonic_ns();
            reader.feed(std::string_view(buf, static_cast<std::size_t>(k)));
            bool open = true;
            try {
                while (open) {
                    std::optional<std::string> payload = reader.next();
                    if (!payload) break;
                    open = handle(fd, sessions, *payload, frame_start);
                    frame_start = monotonic_ns();
                }
            } catch (const ProtocolError& e) {
                // An oversize prefix leaves no way to resynchronise the stream.
                reject(fd, e.kind(), e.what());
                open = false;
            }
            if (!open) break;
        }
        ::shutdown(fd, SHUT_RDWR);
    }
};

Server::Server(const policy::FisPolicy& model, policy::ParamVector params, ServerConfig cfg)
    : impl_(std::make_unique<Impl>(model, std::move(params), std::move(cfg))) {
    impl_->cfg.fis.validate();
    const policy::FisPolicy m = fis::policy_for(impl_->model, impl_->cfg.fis);
    if (impl_->params.layout() != m.layout()) throw policy::ShapeMismatch("parameters do not match the model");
}

Server::~Server() { stop(); }

int Server::start() {
    if (impl_->running) return impl_->bound_port;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(impl_->cfg.port);
    if (::getaddrinfo(impl_->cfg.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw BindError("cannot resolve bind address " + impl_->cfg.host);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw BindError(std::string("socket: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
        const std::string why = std::strerror(errno);
        ::freeaddrinfo(res);
        ::close(fd);
        throw BindError("cannot bind " + impl_->cfg.host + ":" + port + ": " + why);
    }
    ::freeaddrinfo(res);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    impl_->listen_fd = fd;
    impl_->bound_port = ntohs(addr.sin_port);
    impl_->running = true;
    impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
    return impl_->bound_port;
}

void Server::stop() {
    if (!impl_ || !impl_->running.exchange(false)) return;
    if (impl_->acceptor.joinable()) impl_->acceptor.join();
    ::close(impl_->listen_fd);
    impl_->listen_fd = -1;
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(impl_->conn_mutex);
        for (int fd : impl_->conn_fds) ::shutdown(fd, SHUT_RDWR);
        workers.swap(impl_->workers);
    }
    for (std::thread& t : workers) t.join();
    std::lock_guard lock(impl_->conn_mutex);
    for (int fd : impl_->conn_fds) ::close(fd);
    impl_->conn_fds.clear();
}

int Server::port() const { return impl_->bound_port; }
const std::string& Server::host() const { return impl_->cfg.host; }
std::size_t Server::frames_served() const { return impl_->served; }
std::size_t Server::protocol_errors() const { return impl_->errors; }

Client::Client(const std::string& host, int port, std::chrono::milliseconds timeout) : timeout_(timeout) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string p = std::to_string(port);
    if (::getaddrinfo(host.c_str(), p.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw ConnectionClosed("cannot resolve " + host);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
        const std::string why = std::strerror(errno);
        ::freeaddrinfo(res);
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
        throw ConnectionClosed("cannot connect to " + host + ":" + p + ": " + why);
    }
    ::freeaddrinfo(res);
    set_nodelay(fd_);
}

Client::~Client() { close(); }

void Client::close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

void Client::send_raw(std::string_view bytes) {
    if (fd_ < 0) throw ConnectionClosed("client is closed");
    if (!write_all(fd_, bytes)) throw ConnectionClosed("send failed");
}

std::string Client::read_exact(std::size_t n) {
    std::string out;
    out.reserve(n);
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    char buf[65536];
    while (out.size() < n) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw Timeout("no response within the timeout");
        pollfd p{fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, static_cast<int>(left.count()));
        if (r < 0 && errno == EINTR) continue;
        if (r == 0) throw Timeout("no response within the timeout");
        if (r < 0) throw ConnectionClosed(std::string("poll: ") + std::strerror(errno));
        const ssize_t k = ::recv(fd_, buf, std::min(sizeof buf, n - out.size()), 0);
        if (k < 0 && errno == EINTR) continue;
        if (k <= 0) throw ConnectionClosed("server closed the connection");
        out.append(buf, static_cast<std::size_t>(k));
    }
    return out;
}

Response Client::read_response() {
    if (fd_ < 0) throw ConnectionClosed("client is closed");
    const std::string head = read_exact(4);
    const auto* b = reinterpret_cast<const unsigned char*>(head.data());
    const std::size_t n = (std::size_t{b[0]} << 24) | (std::size_t{b[1]} << 16) | (std::size_t{b[2]} << 8) | b[3];
    if (n > kMaxPayload) throw ProtocolError(ErrorKind::Oversize, "response length prefix " + std::to_string(n));
    return decode_response(read_exact(n));
}

ActionFrame Client::request_actions(const ObservationFrame& frame) {
    const std::string bytes = encode(frame);
    const std::int64_t t0 = monotonic_ns();
    send_raw(bytes);
    Response r = read_response();
    const std::int64_t t1 = monotonic_ns();
    if (auto* e = std::get_if<ErrorFrame>(&r)) throw ProtocolError(e->kind, e->message);
    ActionFrame& a = std::get<ActionFrame>(r);
    if (a.session_id != frame.session_id || a.step != frame.step) {
        throw ProtocolError(ErrorKind::Malformed, "response does not echo the request");
    }
    samples_.push_back(LatencySample{t1 - t0, a.server_send_time - a.server_receive_time});
    return a;
}

RemoteEpisodeLog run_remote_episode(Client& client, const env::Episode& episode, const env::Scene& scene,
                                    std::size_t budget, const std::string& session_id, bool stop_on_arrival) {
    RemoteEpisodeLog log;
    log.session_id = session_id;
    env::Pose pose = episode.start;
    log.trajectory.points.push_back(pose.position);
    const std::size_t first_sample = client.samples().size();
    std::size_t step = 0;
    bool done = false;
    while (!done && step < budget) {
        ObservationFrame frame;
        frame.session_id = session_id;
        frame.step = step;
        frame.observation = env::observe(pose, scene, episode.goal, step, budget);
        frame.client_send_time = monotonic_ns();
        if (step == 0) frame.instruction = episode.instruction;
        log.frame_steps.push_back(step);
        const ActionFrame reply = client.request_actions(frame);
        if (reply.actions.empty()) break;
        for (env::Action a : reply.actions) {
            if (step >= budget) break;
            const env::StepResult res = env::step(pose, a, scene);
            log.actions.push_back(a);
            log.latent_steps.push_back(reply.latent_step);
            if (res.new_pose.position != pose.position) log.trajectory.points.push_back(res.new_pose.position);
            pose = res.new_pose;
            ++step;
            if (a == env::Action::Stop) {
                log.stopped = true;
                done = true;
                break;
            }
            if (stop_on_arrival && distance(pose.position, episode.goal) < episode.success_radius) {
                done = true;
                break;
            }
        }
    }
    log.final_position = pose.position;
    log.samples.assign(client.samples().begin() + static_cast<std::ptrdiff_t>(first_sample), client.samples().end());
    return log;
}

json to_json(const RemoteEpisodeLog& log) {
    json actions = json::array();
    for (env::Action a : log.actions) actions.push_back(env::action_name(a));
    json samples = json::array();
    for (const LatencySample& s : log.samples) samples.push_back(to_json(s));
    return {{"session_id", log.session_id},   {"frame_steps", log.frame_steps}, {"latent_steps", log.latent_steps},
            {"actions", actions},             {"trajectory", log.trajectory},   {"final_position", log.final_position},
            {"stopped", log.stopped},         {"samples", samples}};
}

}  // namespace navlab::serve
