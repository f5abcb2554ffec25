#pragma once

// JSON mappings for the configuration structs of the lower modules. Missing
// keys keep their defaults; unknown keys are rejected so typos surface as
// config errors.

#include "plaque/gbt.hpp"
#include "plaque/phantom.hpp"
#include "plaque/radiomics.hpp"

#include <json.hpp>

#include <initializer_list>
#include <stdexcept>
#include <string>

namespace plaque {

// Raised for malformed or invalid configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Throws ConfigError when `j` is not an object or has keys outside `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

namespace radiomics {
void to_json(nlohmann::json& j, const RadiomicsConfig& c);
void from_json(const nlohmann::json& j, RadiomicsConfig& c);
}  // namespace radiomics

namespace gbt {
void to_json(nlohmann::json& j, const BoostConfig& c);
void from_json(const nlohmann::json& j, BoostConfig& c);
}  // namespace gbt

}  // namespace plaque
