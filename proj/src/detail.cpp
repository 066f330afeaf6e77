#include "detail.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include <httplib.h>

#include "prism/error.hpp"

namespace prism::detail {

std::string format_double(double x) {
    if (x == 0.0) return "0";  // folds -0 as well
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::string format_fixed(double x, int decimals) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, decimals);
    std::string s(buf, ptr);
    // "-0.000000" prints as "0.000000" so rounding to zero is sign-free.
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

nlohmann::json post_json(const std::string& host, int port, const std::string& path,
                         const nlohmann::json& body, double timeout_seconds) {
    httplib::Client client(host, port);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(path, body.dump(), "application/json");
    const std::string where = host + ":" + std::to_string(port) + path;
    if (!res)
        throw ProviderError("request to " + where + " failed: " + httplib::to_string(res.error()),
                            true);
    if (res->status >= 500)
        throw ProviderError(where + " returned HTTP " + std::to_string(res->status), true);
    if (res->status != 200)
        throw ProviderError(where + " returned HTTP " + std::to_string(res->status), false);
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw ProviderError(where + " returned a body that is not JSON", false);
    }
}

}  // namespace prism::detail
