#pragma once

#include <stdexcept>
#include <string>

namespace powermarket {

class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid parameters or configuration keys. Maps to exit code 2.
class config_error : public error {
public:
    explicit config_error(const std::string& what) : error(what) {}
};

/// Unreadable, empty or malformed price files.
class ingestion_error : public error {
public:
    explicit ingestion_error(const std::string& what) : error(what) {}
};

/// A statistic that is not defined for the recorded data (e.g. a density of zero mass).
class undefined_statistic : public error {
public:
    explicit undefined_statistic(const std::string& what) : error(what) {}
};

}  // namespace powermarket
