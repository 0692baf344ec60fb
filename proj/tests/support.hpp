#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

namespace testing_support {

inline std::filesystem::path data_dir() { return SEMTEXT_DATA_DIR; }

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("semtext-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(dim);
    for (double& x : v) x = u(rng);
    return v;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    double s = 0.0;
    for (double& x : v) {
        x = n(rng);
        s += x * x;
    }
    s = std::sqrt(s);
    for (double& x : v) x /= s;
    return v;
}

/// An httplib server on an ephemeral port, served from a background thread.
class StubServer {
public:
    httplib::Server server;

    int start() {
        port_ = server.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
        return port_;
    }
    ~StubServer() {
        server.stop();
        if (thread_.joinable()) thread_.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    int port_ = 0;
    std::thread thread_;
};

} // namespace testing_support

namespace testing_support {

/// Random prose-like text: words of 1-20 chars (some non-ASCII), sentence ends,
/// newlines and paragraph breaks, occasional very long unbroken runs.
inline std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> alphabet{"a", "b", "e", "k", "o", "s", "t", "Z", "7",
                                                   "\xc3\xa9", "\xce\xb1", "\xe4\xb8\xad"};
    std::uniform_int_distribution<int> words(0, 400);
    std::uniform_int_distribution<int> len(1, 20);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(alphabet.size()) - 1);
    std::uniform_int_distribution<int> sep(0, 99);
    std::string out;
    const int n = words(rng);
    for (int w = 0; w < n; ++w) {
        const int l = sep(rng) == 0 ? 300 : len(rng);
        for (int c = 0; c < l; ++c) out += alphabet[static_cast<std::size_t>(pick(rng))];
        const int s = sep(rng);
        if (s < 70) {
            out += " ";
        } else if (s < 85) {
            out += ". ";
        } else if (s < 92) {
            out += "\n";
        } else if (s < 97) {
            out += "\n\n";
        } else {
            out += "  \t ";
        }
    }
    return out;
}

} // namespace testing_support
