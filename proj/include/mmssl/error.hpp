// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mmssl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes of op inputs do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class OptimizerError : public Error {
public:
    explicit OptimizerError(const std::string& parameter, const std::string& what)
        : Error("optimizer: parameter '" + parameter + "': " + what), parameter_(parameter) {}
    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

// Everything that can go wrong while reading datasets, manifests, feature files.
class DataError : public Error {
public:
    using Error::Error;
};

class MissingFileError : public DataError {
public:
    using DataError::DataError;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class DimMismatchError : public DataError {
public:
    DimMismatchError(const std::string& sample, const std::string& what)
        : DataError("sample '" + sample + "': " + what), sample_(sample) {}
    const std::string& sample() const noexcept { return sample_; }

private:
    std::string sample_;
};

class SplitOverlapError : public DataError {
public:
    using DataError::DataError;
};

class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

class VersionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class NonFiniteLossError : public Error {
public:
    NonFiniteLossError(const std::string& component, const std::string& what)
        : Error("non-finite loss in component '" + component + "': " + what), component_(component) {}
    const std::string& component() const noexcept { return component_; }

private:
    std::string component_;
};

}  // namespace mmssl
