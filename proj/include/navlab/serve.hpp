#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/env.hpp"
#include "navlab/fis.hpp"
#include "navlab/policy.hpp"

namespace navlab::serve {

enum class ErrorKind { Malformed, OutOfOrder, Truncated, Oversize, Internal };
std::string_view error_kind_name(ErrorKind k);
std::optional<ErrorKind> parse_error_kind(std::string_view name);

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(ErrorKind kind, const std::string& message);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

class BindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Timeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConnectionClosed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Largest accepted payload; longer length prefixes are rejected as oversize.
inline constexpr std::size_t kMaxPayload = 1u << 20;

std::int64_t monotonic_ns();

struct ObservationFrame {
    std::string session_id;
    std::uint64_t step = 0;
    env::Observation observation;
    std::int64_t client_send_time = 0;
    std::optional<std::string> instruction;  // read when the frame opens a session

    friend bool operator==(const ObservationFrame&, const ObservationFrame&) = default;
};

struct ActionFrame {
    std::string session_id;
    std::uint64_t step = 0;
    std::vector<env::Action> actions;
    std::uint64_t latent_step = 0;
    std::int64_t server_receive_time = 0;
    std::int64_t server_send_time = 0;

    friend bool operator==(const ActionFrame&, const ActionFrame&) = default;
};

struct ErrorFrame {
    ErrorKind kind = ErrorKind::Malformed;
    std::string message;
    std::optional<std::string> session_id;
    std::optional<std::uint64_t> step;

    friend bool operator==(const ErrorFrame&, const ErrorFrame&) = default;
};

using Response = std::variant<ActionFrame, ErrorFrame>;

nlohmann::json to_json(const ObservationFrame& f);
nlohmann::json to_json(const ActionFrame& f);
nlohmann::json to_json(const ErrorFrame& f);

// 4-byte big-endian payload length followed by the payload.
std::string encode_frame(std::string_view payload);
std::string encode(const ObservationFrame& f);
std::string encode(const ActionFrame& f);
std::string encode(const ErrorFrame& f);

// Payload decoders (no length prefix). Throw ProtocolError(Malformed).
ObservationFrame decode_observation(std::string_view payload);
Response decode_response(std::string_view payload);

// Splits a byte stream into payloads. Throws ProtocolError(Oversize) on a
// length prefix above kMaxPayload.
class FrameReader {
public:
    void feed(std::string_view bytes);
    std::optional<std::string> next();
    std::size_t buffered() const { return buffer_.size(); }
    void clear() { buffer_.clear(); }

private:
    std::string buffer_;
};

struct LatencySample {
    std::int64_t round_trip = 0;      // nanoseconds
    std::int64_t server_compute = 0;  // nanoseconds

    friend bool operator==(const LatencySample&, const LatencySample&) = default;
};

struct LatencyReport {
    std::size_t count = 0;
    double mean = 0.0;  // nanoseconds
    double p50 = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

// Order statistics of round-trip times; percentiles use the nearest-rank rule.
// Throws std::invalid_argument on an empty list.
LatencyReport latency_report(std::span<const LatencySample> samples);
nlohmann::json to_json(const LatencySample& s);
nlohmann::json to_json(const LatencyReport& r);

struct LatencyRow {
    std::string method;
    std::string location;
    LatencyReport report;
};

// Plain-text method × location table, values in milliseconds.
std::string render_latency_table(std::span<const LatencyRow> rows);
void write_samples_jsonl(const std::filesystem::path& path, std::span<const LatencySample> samples);

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks a free port
    fis::FisConfig fis;
    std::uint64_t seed = 0;
    bool greedy = false;
    // Artificial network delay added after stamping server_send_time, cycled per response.
    std::vector<std::chrono::nanoseconds> delays;
    // A partial frame with no new bytes for this long is reported as truncated and dropped.
    std::chrono::milliseconds truncation_timeout{250};
};

// Hosts one FiS controller per session. Sessions live inside their connection.
class Server {
public:
    Server(const policy::FisPolicy& model, policy::ParamVector params, ServerConfig cfg);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds and starts accepting on a background thread; returns the bound port.
    // Throws BindError.
    int start();
    void stop();
    int port() const;
    const std::string& host() const;
    std::size_t frames_served() const;
    std::size_t protocol_errors() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::uint64_t session_seed(std::uint64_t server_seed, std::string_view session_id);

class Client {
public:
    // Throws ConnectionClosed when the server cannot be reached.
    Client(const std::string& host, int port, std::chrono::milliseconds timeout = std::chrono::seconds(5));
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    // Blocking request/response; records a LatencySample. Throws Timeout,
    // ConnectionClosed, or ProtocolError (server rejection or bad echo).
    ActionFrame request_actions(const ObservationFrame& frame);

    void send_raw(std::string_view bytes);
    Response read_response();

    const std::vector<LatencySample>& samples() const { return samples_; }
    void close();

private:
    std::string read_exact(std::size_t n);

    int fd_ = -1;
    std::chrono::milliseconds timeout_;
    std::vector<LatencySample> samples_;
};

struct RemoteEpisodeLog {
    std::string session_id;
    std::vector<std::uint64_t> frame_steps;
    std::vector<std::uint64_t> latent_steps;  // one per executed action
    std::vector<env::Action> actions;
    Trajectory trajectory;
    Vec2 final_position;
    bool stopped = false;
    std::vector<LatencySample> samples;
};

// Thin robot loop: sense, send, execute the returned chunk; ends at STOP,
// arrival (unless disabled), an empty chunk, or the budget.
RemoteEpisodeLog run_remote_episode(Client& client, const env::Episode& episode, const env::Scene& scene,
                                    std::size_t budget, const std::string& session_id, bool stop_on_arrival = true);

nlohmann::json to_json(const RemoteEpisodeLog& log);

}  // namespace navlab::serve
