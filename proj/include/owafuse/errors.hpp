#pragma once

#include <stdexcept>
#include <string>

namespace owafuse {

// Shape/dimension preconditions of an operation were violated by the caller.
struct contract_error : std::invalid_argument {
    explicit contract_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid configuration values (CLI flags, config file, OwaConfig fields).
struct config_error : std::invalid_argument {
    explicit config_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Filesystem / codec failures. Messages carry the offending path.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content (FMAP, manifest, rasters).
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed OWAF1 checkpoints. Split by failure class so loaders can
// distinguish a wrong file from a damaged one.
struct checkpoint_error : format_error {
    explicit checkpoint_error(const std::string& msg) : format_error(msg) {}
};
struct checkpoint_magic_error : checkpoint_error {
    explicit checkpoint_magic_error(const std::string& msg) : checkpoint_error(msg) {}
};
struct checkpoint_shape_error : checkpoint_error {
    explicit checkpoint_shape_error(const std::string& msg) : checkpoint_error(msg) {}
};
struct checkpoint_payload_error : checkpoint_error {
    explicit checkpoint_payload_error(const std::string& msg) : checkpoint_error(msg) {}
};

// API misuse that is a programming error, not a data problem
// (e.g. backward() without a populated forward cache).
struct usage_error : std::logic_error {
    explicit usage_error(const std::string& msg) : std::logic_error(msg) {}
};

// Training hit a non-finite loss; carries epoch/batch diagnostics.
struct train_abort : std::runtime_error {
    explicit train_abort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace owafuse
