#pragma once

#include <stdexcept>
#include <string>

namespace rcfm {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonDifferentiable : public Error {
 public:
  using Error::Error;
};

class BadGeometry : public Error {
 public:
  using Error::Error;
};

class Explosion : public Error {
 public:
  using Error::Error;
};

/// A weight |T'|^{-t} was requested at a (numerically) critical point.
class SingularWeight : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class OutOfGrid : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& msg)
      : Error(key + ": " + msg), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace rcfm
