#pragma once

#include <stdexcept>
#include <string>

namespace ltd {

// Every failure raised by the library derives from Error so callers can map
// the concrete class onto an exit code or a Python exception.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidShape : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace ltd
