#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace prism::detail {

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
std::string format_fixed(double x, int decimals);
// Strict: the whole field must be a finite number.
bool parse_double(std::string_view s, double& out);

// POST a JSON body and return the decoded JSON reply. Transport failures and
// 5xx replies raise a retriable ProviderError; 4xx and malformed bodies do not.
nlohmann::json post_json(const std::string& host, int port, const std::string& path,
                         const nlohmann::json& body, double timeout_seconds);

}  // namespace prism::detail
