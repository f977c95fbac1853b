#include "hintsteer/pg_client.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <sys/un.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <map>

namespace hintsteer {

namespace {

constexpr std::int32_t kProtocolVersion3 = 196608;

void PutInt32(std::string& out, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>((u >> 24) & 0xFF));
  out.push_back(static_cast<char>((u >> 16) & 0xFF));
  out.push_back(static_cast<char>((u >> 8) & 0xFF));
  out.push_back(static_cast<char>(u & 0xFF));
}

void PutCString(std::string& out, std::string_view s) {
  out.append(s);
  out.push_back('\0');
}

// Bounds-checked reader over a message body.
class Reader {
 public:
  explicit Reader(std::string_view body) : body_(body) {}

  std::int32_t Int32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(body_[pos_++]);
    return static_cast<std::int32_t>(v);
  }
  std::int16_t Int16() {
    Need(2);
    std::uint16_t v = static_cast<std::uint16_t>((static_cast<unsigned char>(body_[pos_]) << 8) |
                                                 static_cast<unsigned char>(body_[pos_ + 1]));
    pos_ += 2;
    return static_cast<std::int16_t>(v);
  }
  char Byte() {
    Need(1);
    return body_[pos_++];
  }
  std::string CString() {
    const auto end = body_.find('\0', pos_);
    if (end == std::string_view::npos) throw DatabaseError("malformed server message: unterminated string");
    std::string s(body_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s(body_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string Rest() {
    std::string s(body_.substr(pos_));
    pos_ = body_.size();
    return s;
  }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > body_.size()) throw DatabaseError("malformed server message: truncated");
  }
  std::string_view body_;
  std::size_t pos_ = 0;
};

std::map<char, std::string> ParseErrorFields(std::string_view body) {
  std::map<char, std::string> fields;
  Reader r(body);
  while (true) {
    const char code = r.Byte();
    if (code == '\0') break;
    fields[code] = r.CString();
  }
  return fields;
}

std::string Digest(const EVP_MD* md, std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, md, nullptr) != 1) {
    throw DatabaseError("digest computation failed");
  }
  return std::string(reinterpret_cast<const char*>(out.data()), len);
}

std::string Hex(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xF]);
  }
  return out;
}

std::string Hmac256(std::string_view key, std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
           reinterpret_cast<const unsigned char*>(data.data()), data.size(), out.data(), &len) ==
      nullptr) {
    throw DatabaseError("HMAC computation failed");
  }
  return std::string(reinterpret_cast<const char*>(out.data()), len);
}

std::string Base64Encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string Base64Decode(std::string_view text) {
  std::string out(3 * text.size() / 4 + 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw DatabaseError("invalid base64 from server");
  std::size_t len = static_cast<std::size_t>(n);
  for (auto it = text.rbegin(); it != text.rend() && *it == '='; ++it) --len;
  out.resize(len);
  return out;
}

std::map<char, std::string> ParseScramAttributes(std::string_view msg) {
  std::map<char, std::string> attrs;
  std::size_t start = 0;
  while (start < msg.size()) {
    auto comma = msg.find(',', start);
    if (comma == std::string_view::npos) comma = msg.size();
    const auto part = msg.substr(start, comma - start);
    if (part.size() >= 2 && part[1] == '=') attrs[part[0]] = std::string(part.substr(2));
    start = comma + 1;
  }
  return attrs;
}

std::string PercentDecode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

void ApplyParam(ConnectionParams& p, std::string_view key, const std::string& value) {
  if (key == "host" || key == "hostaddr") {
    p.host = value;
  } else if (key == "port") {
    const int port = std::atoi(value.c_str());
    if (port <= 0 || port > 65535) throw ConfigError("invalid port in connection string: " + value);
    p.port = static_cast<std::uint16_t>(port);
  } else if (key == "user") {
    p.user = value;
  } else if (key == "password") {
    p.password = value;
  } else if (key == "dbname") {
    p.dbname = value;
  } else if (key == "connect_timeout") {
    p.connect_timeout = std::chrono::seconds(std::atoi(value.c_str()));
  } else if (key == "sslmode") {
    if (value != "disable" && value != "allow" && value != "prefer") {
      throw ConfigError("sslmode=" + value + " is not supported; use sslmode=disable");
    }
  } else {
    throw ConfigError("unsupported connection parameter '" + std::string(key) + "'");
  }
}

}  // namespace

ConnectionParams ParseConnectionString(std::string_view conninfo) {
  ConnectionParams p;
  if (conninfo.starts_with("postgresql://") || conninfo.starts_with("postgres://")) {
    auto rest = conninfo.substr(conninfo.find("://") + 3);
    std::string_view query;
    if (auto q = rest.find('?'); q != std::string_view::npos) {
      query = rest.substr(q + 1);
      rest = rest.substr(0, q);
    }
    std::string_view authority = rest;
    if (auto slash = rest.find('/'); slash != std::string_view::npos) {
      authority = rest.substr(0, slash);
      if (slash + 1 < rest.size()) p.dbname = PercentDecode(rest.substr(slash + 1));
    }
    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
      const auto userinfo = authority.substr(0, at);
      authority = authority.substr(at + 1);
      if (auto colon = userinfo.find(':'); colon != std::string_view::npos) {
        p.user = PercentDecode(userinfo.substr(0, colon));
        p.password = PercentDecode(userinfo.substr(colon + 1));
      } else {
        p.user = PercentDecode(userinfo);
      }
    }
    if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
      ApplyParam(p, "port", std::string(authority.substr(colon + 1)));
      authority = authority.substr(0, colon);
    }
    if (!authority.empty()) p.host = PercentDecode(authority);
    while (!query.empty()) {
      auto amp = query.find('&');
      const auto pair = query.substr(0, amp);
      const auto eq = pair.find('=');
      if (eq == std::string_view::npos) throw ConfigError("malformed URI parameter in connection string");
      ApplyParam(p, pair.substr(0, eq), PercentDecode(pair.substr(eq + 1)));
      query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    }
  } else {
    std::size_t i = 0;
    while (i < conninfo.size()) {
      while (i < conninfo.size() && conninfo[i] == ' ') ++i;
      if (i >= conninfo.size()) break;
      const auto eq = conninfo.find('=', i);
      if (eq == std::string_view::npos) throw ConfigError("malformed connection string near '" +
                                                          std::string(conninfo.substr(i)) + "'");
      const auto key = conninfo.substr(i, eq - i);
      std::string value;
      i = eq + 1;
      if (i < conninfo.size() && conninfo[i] == '\'') {
        ++i;
        while (i < conninfo.size() && conninfo[i] != '\'') {
          if (conninfo[i] == '\\' && i + 1 < conninfo.size()) ++i;
          value.push_back(conninfo[i++]);
        }
        ++i;
      } else {
        while (i < conninfo.size() && conninfo[i] != ' ') value.push_back(conninfo[i++]);
      }
      ApplyParam(p, key, value);
    }
  }
  if (p.dbname.empty()) p.dbname = p.user;
  if (p.password.empty()) {
    if (const char* env = std::getenv("PGPASSWORD")) p.password = env;
  }
  return p;
}

// ---------------------------------------------------------------------------

PgConnection::PgConnection(const ConnectionParams& params) {
  const std::string where = params.host + ":" + std::to_string(params.port);
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(params.connect_timeout.count());

  if (!params.host.empty() && params.host.front() == '/') {
    const std::string path = params.host + "/.s.PGSQL." + std::to_string(params.port);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof(addr.sun_path)) throw ConfigError("socket path too long: " + path);
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd_ < 0) throw DatabaseError("socket() failed");
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      fd_ = -1;
      throw DatabaseError("cannot connect to " + path + ": " + err);
    }
  } else {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(params.port);
    if (::getaddrinfo(params.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
      throw DatabaseError("cannot resolve " + params.host);
    }
    std::string last_err = "no addresses";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      last_err = std::strerror(errno);
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw DatabaseError("cannot connect to " + where + ": " + last_err);
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  try {
    std::string startup;
    PutInt32(startup, 0);
    PutInt32(startup, kProtocolVersion3);
    PutCString(startup, "user");
    PutCString(startup, params.user);
    PutCString(startup, "database");
    PutCString(startup, params.dbname);
    PutCString(startup, "client_encoding");
    PutCString(startup, "UTF8");
    startup.push_back('\0');
    const auto len = static_cast<std::int32_t>(startup.size());
    std::string header;
    PutInt32(header, len);
    startup.replace(0, 4, header);
    SendRaw(startup);

    Authenticate(params);

    while (true) {
      Message m = Receive();
      if (m.type == 'Z') break;
      if (m.type == 'E') FailWithServerError(m);
      if (m.type == 'S') {
        Reader r(m.body);
        const auto name = r.CString();
        const auto value = r.CString();
        if (name == "server_version") server_version_ = value;
      }
    }
  } catch (...) {
    ::close(fd_);
    fd_ = -1;
    throw;
  }
}

PgConnection::~PgConnection() {
  if (fd_ < 0) return;
  try {
    Send('X', {});
  } catch (...) {
  }
  ::close(fd_);
}

void PgConnection::SendRaw(std::string_view bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw DatabaseError(std::string("connection lost while sending: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

void PgConnection::Send(char type, std::string_view body) {
  std::string msg;
  msg.push_back(type);
  PutInt32(msg, static_cast<std::int32_t>(body.size() + 4));
  msg.append(body);
  SendRaw(msg);
}

PgConnection::Message PgConnection::Receive() {
  auto read_exact = [this](char* buf, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      const auto r = ::recv(fd_, buf + got, n - got, 0);
      if (r == 0) throw DatabaseError("server closed the connection");
      if (r < 0) {
        if (errno == EINTR) continue;
        throw DatabaseError(std::string("connection lost while receiving: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(r);
    }
  };
  std::array<char, 5> header{};
  read_exact(header.data(), header.size());
  Message m;
  m.type = header[0];
  const std::int32_t len = Reader(std::string_view(header.data() + 1, 4)).Int32();
  if (len < 4 || len > (1 << 30)) throw DatabaseError("server sent an invalid message length");
  m.body.resize(static_cast<std::size_t>(len - 4));
  if (!m.body.empty()) read_exact(m.body.data(), m.body.size());
  return m;
}

void PgConnection::FailWithServerError(const Message& msg) {
  auto fields = ParseErrorFields(msg.body);
  throw PgServerError(fields['C'], fields['M']);
}

void PgConnection::Authenticate(const ConnectionParams& params) {
  while (true) {
    Message m = Receive();
    if (m.type == 'E') FailWithServerError(m);
    if (m.type != 'R') throw DatabaseError(std::string("unexpected message during startup: ") + m.type);
    Reader r(m.body);
    const std::int32_t code = r.Int32();
    switch (code) {
      case 0:
        return;
      case 3: {
        std::string body;
        PutCString(body, params.password);
        Send('p', body);
        break;
      }
      case 5: {
        const std::string salt = r.Bytes(4);
        const std::string inner = Hex(Digest(EVP_md5(), params.password + params.user));
        std::string body;
        PutCString(body, "md5" + Hex(Digest(EVP_md5(), inner + salt)));
        Send('p', body);
        break;
      }
      case 10: {
        bool scram = false;
        while (true) {
          const auto mech = r.CString();
          if (mech.empty()) break;
          if (mech == "SCRAM-SHA-256") scram = true;
        }
        if (!scram) throw DatabaseError("server offers no supported SASL mechanism");
        ScramAuthenticate(params);
        break;
      }
      default:
        throw DatabaseError("unsupported authentication method code " + std::to_string(code));
    }
  }
}

void PgConnection::ScramAuthenticate(const ConnectionParams& params) {
  std::array<unsigned char, 18> raw{};
  if (RAND_bytes(raw.data(), static_cast<int>(raw.size())) != 1) {
    throw DatabaseError("cannot generate SCRAM nonce");
  }
  const std::string client_nonce =
      Base64Encode(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
  const std::string client_first_bare = "n=,r=" + client_nonce;
  const std::string client_first = "n,," + client_first_bare;

  std::string init;
  PutCString(init, "SCRAM-SHA-256");
  PutInt32(init, static_cast<std::int32_t>(client_first.size()));
  init.append(client_first);
  Send('p', init);

  Message m = Receive();
  if (m.type == 'E') FailWithServerError(m);
  Reader r(m.body);
  if (m.type != 'R' || r.Int32() != 11) throw DatabaseError("expected SASL continue from server");
  const std::string server_first = r.Rest();
  auto attrs = ParseScramAttributes(server_first);
  const std::string& nonce = attrs['r'];
  if (!nonce.starts_with(client_nonce)) throw DatabaseError("SCRAM server nonce mismatch");
  const std::string salt = Base64Decode(attrs['s']);
  const int iterations = std::atoi(attrs['i'].c_str());
  if (iterations <= 0) throw DatabaseError("SCRAM iteration count missing");

  std::array<unsigned char, 32> salted{};
  if (PKCS5_PBKDF2_HMAC(params.password.data(), static_cast<int>(params.password.size()),
                        reinterpret_cast<const unsigned char*>(salt.data()),
                        static_cast<int>(salt.size()), iterations, EVP_sha256(),
                        static_cast<int>(salted.size()), salted.data()) != 1) {
    throw DatabaseError("PBKDF2 failed");
  }
  const std::string salted_password(reinterpret_cast<const char*>(salted.data()), salted.size());
  const std::string client_key = Hmac256(salted_password, "Client Key");
  const std::string stored_key = Digest(EVP_sha256(), client_key);
  const std::string final_without_proof = "c=biws,r=" + nonce;
  const std::string auth_message = client_first_bare + "," + server_first + "," + final_without_proof;
  const std::string signature = Hmac256(stored_key, auth_message);
  std::string proof = client_key;
  for (std::size_t i = 0; i < proof.size(); ++i) proof[i] = static_cast<char>(proof[i] ^ signature[i]);
  Send('p', final_without_proof + ",p=" + Base64Encode(proof));

  m = Receive();
  if (m.type == 'E') FailWithServerError(m);
  Reader fin(m.body);
  if (m.type != 'R' || fin.Int32() != 12) throw DatabaseError("expected SASL final from server");
  auto final_attrs = ParseScramAttributes(fin.Rest());
  const std::string server_key = Hmac256(salted_password, "Server Key");
  if (Base64Decode(final_attrs['v']) != Hmac256(server_key, auth_message)) {
    throw DatabaseError("SCRAM server signature did not verify");
  }
}

QueryResult PgConnection::Execute(std::string_view sql) {
  std::string body;
  PutCString(body, sql);
  Send('Q', body);

  QueryResult result;
  std::optional<PgServerError> error;
  while (true) {
    Message m = Receive();
    switch (m.type) {
      case 'T': {
        Reader r(m.body);
        result.columns.clear();
        result.rows.clear();
        const int n = r.Int16();
        for (int i = 0; i < n; ++i) {
          result.columns.push_back(r.CString());
          r.Bytes(18);  // table oid, attnum, type oid, typlen, typmod, format
        }
        break;
      }
      case 'D': {
        Reader r(m.body);
        const int n = r.Int16();
        std::vector<std::optional<std::string>> row;
        row.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          const std::int32_t len = r.Int32();
          if (len < 0) {
            row.emplace_back(std::nullopt);
          } else {
            row.emplace_back(r.Bytes(static_cast<std::size_t>(len)));
          }
        }
        result.rows.push_back(std::move(row));
        break;
      }
      case 'C': {
        Reader r(m.body);
        result.command_tag = r.CString();
        break;
      }
      case 'E': {
        auto fields = ParseErrorFields(m.body);
        if (!error) error.emplace(fields['C'], fields['M']);
        break;
      }
      case 'G': {
        std::string fail;
        PutCString(fail, "COPY FROM STDIN is not supported");
        Send('f', fail);
        break;
      }
      case 'Z':
        if (error) throw *error;
        return result;
      default:
        // Notices, parameter changes, empty-query and COPY OUT data are ignored.
        break;
    }
  }
}

}  // namespace hintsteer
