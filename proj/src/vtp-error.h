#pragma once

#include <stdexcept>
#include <string>

namespace vtp {

enum class status {
    ok = 0,
    config_error,
    budget_error,
    input_error,
    state_error,
    undefined_value,
    io_error,
    runtime_error,
};

const char * status_name(status s);

struct error : std::runtime_error {
    status code;
    error(status c, const std::string & msg) : std::runtime_error(msg), code(c) {}
};

[[noreturn]] inline void fail(status c, const std::string & msg) {
    throw error(c, msg);
}

} // namespace vtp
