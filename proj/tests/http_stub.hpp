#pragma once

// In-process HTTP endpoint for provider tests.

#include <functional>
#include <string>
#include <thread>

#include <httplib.h>

class HttpStub {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    HttpStub(const std::string& path, Handler handler) {
        server_.Post(path, [handler](const httplib::Request& req, httplib::Response& res) {
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~HttpStub() {
        server_.stop();
        thread_.join();
    }

    int port() const { return port_; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

// A port with nothing listening: bind, remember, release.
inline int closed_port() {
    httplib::Server s;
    const int port = s.bind_to_any_port("127.0.0.1");
    s.stop();
    return port;
}
