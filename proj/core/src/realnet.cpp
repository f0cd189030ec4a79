#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "blockscope/realnet.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/ip.h>
#include <netinet/ip_icmp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <linux/errqueue.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "blockscope/url.hpp"

namespace blockscope {

namespace {

using std::chrono::duration_cast;
using std::chrono::milliseconds;
using std::chrono::steady_clock;

struct FdGuard {
  int fd = -1;
  ~FdGuard() {
    if (fd >= 0) ::close(fd);
  }
};

std::string addr_to_string(const in_addr& a) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &a, buf, sizeof(buf));
  return buf;
}

bool parse_ipv4(const std::string& text, in_addr* out) {
  return inet_pton(AF_INET, text.c_str(), out) == 1;
}

std::uint16_t icmp_checksum(const void* data, std::size_t len) {
  const auto* p = static_cast<const std::uint16_t*>(data);
  std::uint32_t sum = 0;
  while (len > 1) {
    sum += *p++;
    len -= 2;
  }
  if (len == 1) sum += *reinterpret_cast<const std::uint8_t*>(p);
  sum = (sum >> 16) + (sum & 0xffff);
  sum += (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

int remaining_ms(steady_clock::time_point deadline) {
  auto left = duration_cast<milliseconds>(deadline - steady_clock::now()).count();
  return left > 0 ? static_cast<int>(left) : 0;
}

// Reads one ICMP error (time exceeded) from a connected socket's error queue.
// Returns the offender address, or nullopt when the queue has nothing useful.
std::optional<std::string> read_icmp_error(int fd) {
  char control[512];
  char data[256];
  iovec iov{data, sizeof(data)};
  msghdr msg{};
  msg.msg_iov = &iov;
  msg.msg_iovlen = 1;
  msg.msg_control = control;
  msg.msg_controllen = sizeof(control);
  if (recvmsg(fd, &msg, MSG_ERRQUEUE | MSG_DONTWAIT) < 0) return std::nullopt;
  for (cmsghdr* cm = CMSG_FIRSTHDR(&msg); cm; cm = CMSG_NXTHDR(&msg, cm)) {
    if (cm->cmsg_level != SOL_IP || cm->cmsg_type != IP_RECVERR) continue;
    auto* ee = reinterpret_cast<sock_extended_err*>(CMSG_DATA(cm));
    if (ee->ee_origin != SO_EE_ORIGIN_ICMP) continue;
    if (ee->ee_type != ICMP_TIME_EXCEEDED) continue;
    auto* offender = reinterpret_cast<sockaddr_in*>(SO_EE_OFFENDER(ee));
    if (offender->sin_family == AF_INET) return addr_to_string(offender->sin_addr);
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::vector<std::string>> SystemResolver::resolve(const std::string& host) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &result) != 0 || !result) {
    return std::nullopt;
  }
  std::vector<std::string> out;
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    if (ai->ai_family != AF_INET) continue;
    out.push_back(addr_to_string(reinterpret_cast<sockaddr_in*>(ai->ai_addr)->sin_addr));
  }
  freeaddrinfo(result);
  if (out.empty()) return std::nullopt;
  return out;
}

HttpResult RealHttpTransport::roundtrip(const HttpRequestSpec& request) {
  HttpResult result;
  auto parsed = parse_url(request.url);
  if (!parsed) {
    result.failure = FailureKind::ProtocolError;
    return result;
  }

  // Resolve first so DNS trouble is reported as such; httplib folds it into
  // a generic connection error otherwise.
  SystemResolver resolver;
  if (!resolver.resolve(parsed->host)) {
    result.failure = FailureKind::DnsFailure;
    return result;
  }

  const auto started = steady_clock::now();
  const auto timeout = request.timeout;
  auto prepare = [&](auto& cli) {
    cli.set_connection_timeout(timeout.count() / 1000,
                               static_cast<int>(timeout.count() % 1000) * 1000);
    cli.set_read_timeout(timeout.count() / 1000,
                         static_cast<int>(timeout.count() % 1000) * 1000);
    cli.set_write_timeout(timeout.count() / 1000,
                          static_cast<int>(timeout.count() % 1000) * 1000);
    cli.set_follow_location(false);  // redirect chains are the fetcher's job
  };

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  if (!request.cookies.empty()) {
    std::string cookie;
    for (const auto& [name, value] : request.cookies) {
      if (!cookie.empty()) cookie += "; ";
      cookie += name + "=" + value;
    }
    headers.emplace("Cookie", cookie);
  }

  httplib::Result res{nullptr, httplib::Error::Unknown};
  if (parsed->scheme == Scheme::Https) {
    httplib::SSLClient cli(parsed->host, parsed->effective_port());
    cli.enable_server_certificate_verification(request.tls_verify);
    prepare(cli);
    res = cli.Get(parsed->path, headers);
  } else {
    httplib::Client cli(parsed->host, parsed->effective_port());
    prepare(cli);
    res = cli.Get(parsed->path, headers);
  }

  if (res) {
    HttpResponseData data;
    data.status = res->status;
    for (const auto& [k, v] : res->headers) data.headers.emplace_back(k, v);
    data.body = res->body;
    result.response = std::move(data);
    return result;
  }

  const bool deadline_hit = steady_clock::now() - started >= timeout - milliseconds(50);
  switch (res.error()) {
    case httplib::Error::ConnectionTimeout:
      result.failure = FailureKind::DeadlineExceeded;
      break;
    case httplib::Error::Connection:
      result.failure = deadline_hit ? FailureKind::DeadlineExceeded
                                    : FailureKind::ConnectionRefused;
      break;
    case httplib::Error::Read:
    case httplib::Error::Write:
      // httplib does not distinguish a reset from a stalled peer; go by time.
      result.failure = deadline_hit ? FailureKind::DeadlineExceeded
                                    : FailureKind::ConnectionReset;
      break;
    case httplib::Error::SSLConnection:
    case httplib::Error::SSLLoadingCerts:
    case httplib::Error::SSLServerVerification:
      result.failure = FailureKind::TlsError;
      break;
    case httplib::Error::Canceled:
      result.failure = FailureKind::ConnectionAborted;
      break;
    default:
      result.failure = FailureKind::ProtocolError;
      break;
  }
  return result;
}

// ---- probe transport ---------------------------------------------------------

namespace {

int open_icmp_socket() {
  int fd = socket(AF_INET, SOCK_RAW, IPPROTO_ICMP);
  if (fd >= 0) return fd;
  return socket(AF_INET, SOCK_DGRAM, IPPROTO_ICMP);
}

std::optional<ProbeReply> icmp_probe(const ProbeSpec& spec, milliseconds timeout) {
  in_addr dst{};
  if (!parse_ipv4(spec.destination, &dst)) {
    throw ProbeError("not an IPv4 address: " + spec.destination);
  }
  FdGuard sock{open_icmp_socket()};
  if (sock.fd < 0) {
    throw ProbeError(std::string("cannot open ICMP socket: ") + std::strerror(errno));
  }
  const bool raw = [&] {
    int type = 0;
    socklen_t len = sizeof(type);
    getsockopt(sock.fd, SOL_SOCKET, SO_TYPE, &type, &len);
    return type == SOCK_RAW;
  }();

  int ttl = spec.ttl;
  setsockopt(sock.fd, IPPROTO_IP, IP_TTL, &ttl, sizeof(ttl));
  int on = 1;
  setsockopt(sock.fd, IPPROTO_IP, IP_RECVERR, &on, sizeof(on));

  struct EchoPacket {
    icmphdr hdr;
    char payload[16];
  } pkt{};
  pkt.hdr.type = ICMP_ECHO;
  pkt.hdr.un.echo.id = htons(spec.ident);
  pkt.hdr.un.echo.sequence = htons(spec.sequence);
  std::memcpy(pkt.payload, "blockscope-probe", sizeof(pkt.payload));
  pkt.hdr.checksum = icmp_checksum(&pkt, sizeof(pkt));

  sockaddr_in to{};
  to.sin_family = AF_INET;
  to.sin_addr = dst;
  const auto started = steady_clock::now();
  if (sendto(sock.fd, &pkt, sizeof(pkt), 0, reinterpret_cast<sockaddr*>(&to),
             sizeof(to)) < 0) {
    throw ProbeError(std::string("icmp send failed: ") + std::strerror(errno));
  }

  const auto deadline = started + timeout;
  char buf[1500];
  while (true) {
    pollfd pfd{sock.fd, POLLIN | POLLERR, 0};
    int rc = poll(&pfd, 1, remaining_ms(deadline));
    if (rc <= 0) return std::nullopt;
    double rtt = duration_cast<milliseconds>(steady_clock::now() - started).count();

    if (pfd.revents & POLLERR) {
      if (auto offender = read_icmp_error(sock.fd)) {
        return ProbeReply{HopKind::TtlExceeded, *offender, rtt};
      }
      continue;
    }

    sockaddr_in from{};
    socklen_t from_len = sizeof(from);
    ssize_t n = recvfrom(sock.fd, buf, sizeof(buf), MSG_DONTWAIT,
                         reinterpret_cast<sockaddr*>(&from), &from_len);
    if (n <= 0) continue;

    const char* icmp_bytes = buf;  // ip_icmp.h macro-pollutes "icmp_data"
    std::size_t icmp_len = static_cast<std::size_t>(n);
    if (raw) {  // raw sockets deliver the IP header too
      if (icmp_len < sizeof(iphdr)) continue;
      auto* ip = reinterpret_cast<const iphdr*>(buf);
      std::size_t ihl = static_cast<std::size_t>(ip->ihl) * 4;
      if (icmp_len < ihl + sizeof(icmphdr)) continue;
      icmp_bytes = buf + ihl;
      icmp_len -= ihl;
    }
    auto* hdr = reinterpret_cast<const icmphdr*>(icmp_bytes);

    if (hdr->type == ICMP_ECHOREPLY) {
      // Datagram sockets demultiplex by id for us; raw sockets do not.
      if (raw && ntohs(hdr->un.echo.id) != spec.ident) continue;
      if (raw && ntohs(hdr->un.echo.sequence) != spec.sequence) continue;
      return ProbeReply{HopKind::EchoReply, addr_to_string(from.sin_addr), rtt};
    }
    if (hdr->type == ICMP_TIME_EXCEEDED && raw) {
      // The payload holds the expired probe: inner IP header + our echo header.
      if (icmp_len < sizeof(icmphdr) + sizeof(iphdr) + 8) continue;
      auto* inner_ip = reinterpret_cast<const iphdr*>(icmp_bytes + sizeof(icmphdr));
      std::size_t inner_ihl = static_cast<std::size_t>(inner_ip->ihl) * 4;
      if (icmp_len < sizeof(icmphdr) + inner_ihl + 8) continue;
      auto* inner =
          reinterpret_cast<const icmphdr*>(icmp_bytes + sizeof(icmphdr) + inner_ihl);
      if (ntohs(inner->un.echo.id) != spec.ident) continue;
      return ProbeReply{HopKind::TtlExceeded, addr_to_string(from.sin_addr), rtt};
    }
  }
}

// SYN probe via a TTL-limited non-blocking connect. The kernel surfaces a
// SYN-ACK as connect completion, an RST as ECONNREFUSED, and the router's
// time-exceeded through the error queue; no raw socket needed.
std::optional<ProbeReply> tcp_probe(const ProbeSpec& spec, milliseconds timeout) {
  in_addr dst{};
  if (!parse_ipv4(spec.destination, &dst)) {
    throw ProbeError("not an IPv4 address: " + spec.destination);
  }
  FdGuard sock{socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK, 0)};
  if (sock.fd < 0) throw ProbeError("cannot open TCP socket");

  int ttl = spec.ttl;
  setsockopt(sock.fd, IPPROTO_IP, IP_TTL, &ttl, sizeof(ttl));
  int on = 1;
  setsockopt(sock.fd, IPPROTO_IP, IP_RECVERR, &on, sizeof(on));

  sockaddr_in to{};
  to.sin_family = AF_INET;
  to.sin_port = htons(spec.port);
  to.sin_addr = dst;
  const auto started = steady_clock::now();
  const auto deadline = started + timeout;
  connect(sock.fd, reinterpret_cast<sockaddr*>(&to), sizeof(to));

  while (true) {
    pollfd pfd{sock.fd, POLLOUT | POLLERR, 0};
    int rc = poll(&pfd, 1, remaining_ms(deadline));
    if (rc <= 0) return std::nullopt;
    double rtt = duration_cast<milliseconds>(steady_clock::now() - started).count();

    if (pfd.revents & POLLERR) {
      if (auto offender = read_icmp_error(sock.fd)) {
        return ProbeReply{HopKind::TtlExceeded, *offender, rtt};
      }
    }
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(sock.fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err == 0 && (pfd.revents & POLLOUT)) {
      return ProbeReply{HopKind::SynAck, spec.destination, rtt};
    }
    if (err == ECONNREFUSED) {
      return ProbeReply{HopKind::Rst, spec.destination, rtt};
    }
    if (err != 0 && err != EINPROGRESS && err != EHOSTUNREACH && err != ENETUNREACH) {
      return std::nullopt;
    }
    if (err == EHOSTUNREACH || err == ENETUNREACH) return std::nullopt;
  }
}

// Stateful GET probe: fresh full-TTL handshake, then the GET segment goes out
// TTL-limited. Any response byte counts as the HTTP reply.
std::optional<ProbeReply> http_probe(const ProbeSpec& spec, milliseconds timeout) {
  in_addr dst{};
  if (!parse_ipv4(spec.destination, &dst)) {
    throw ProbeError("not an IPv4 address: " + spec.destination);
  }
  FdGuard sock{socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK, 0)};
  if (sock.fd < 0) throw ProbeError("cannot open TCP socket");

  sockaddr_in to{};
  to.sin_family = AF_INET;
  to.sin_port = htons(spec.port);
  to.sin_addr = dst;
  const auto started = steady_clock::now();
  const auto deadline = started + timeout;
  connect(sock.fd, reinterpret_cast<sockaddr*>(&to), sizeof(to));
  {
    pollfd pfd{sock.fd, POLLOUT, 0};
    if (poll(&pfd, 1, remaining_ms(deadline)) <= 0) return std::nullopt;
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(sock.fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw ProbeError("handshake lost before the GET probe");
  }

  int ttl = spec.ttl;
  setsockopt(sock.fd, IPPROTO_IP, IP_TTL, &ttl, sizeof(ttl));
  int on = 1;
  setsockopt(sock.fd, IPPROTO_IP, IP_RECVERR, &on, sizeof(on));
  // Leave with an RST so half-delivered GETs do not linger server-side.
  linger lg{1, 0};
  setsockopt(sock.fd, SOL_SOCKET, SO_LINGER, &lg, sizeof(lg));

  std::string get = "GET " + (spec.http_path.empty() ? "/" : spec.http_path) +
                    " HTTP/1.1\r\nHost: " + spec.http_host +
                    "\r\nUser-Agent: " + spec.user_agent + "\r\nConnection: close\r\n\r\n";
  if (send(sock.fd, get.data(), get.size(), MSG_NOSIGNAL) < 0 && errno != EINPROGRESS &&
      errno != EAGAIN) {
    return std::nullopt;
  }

  char buf[1500];
  while (true) {
    pollfd pfd{sock.fd, POLLIN | POLLERR, 0};
    int rc = poll(&pfd, 1, remaining_ms(deadline));
    if (rc <= 0) return std::nullopt;
    double rtt = duration_cast<milliseconds>(steady_clock::now() - started).count();

    if (pfd.revents & POLLERR) {
      if (auto offender = read_icmp_error(sock.fd)) {
        return ProbeReply{HopKind::TtlExceeded, *offender, rtt};
      }
      int err = 0;
      socklen_t len = sizeof(err);
      getsockopt(sock.fd, SOL_SOCKET, SO_ERROR, &err, &len);
      if (err == ECONNRESET) return ProbeReply{HopKind::Rst, spec.destination, rtt};
      if (err != 0) return std::nullopt;
    }
    if (pfd.revents & POLLIN) {
      ssize_t n = recv(sock.fd, buf, sizeof(buf), MSG_DONTWAIT);
      if (n > 0) return ProbeReply{HopKind::HttpResponse, spec.destination, rtt};
      if (n == 0) return std::nullopt;
    }
  }
}

}  // namespace

RealProbeTransport::RealProbeTransport(std::chrono::milliseconds per_hop_timeout)
    : per_hop_timeout_(per_hop_timeout) {}

std::optional<ProbeReply> RealProbeTransport::probe(const ProbeSpec& spec) {
  switch (spec.role) {
    case ProbeRole::EchoRequest: return icmp_probe(spec, per_hop_timeout_);
    case ProbeRole::Syn: return tcp_probe(spec, per_hop_timeout_);
    case ProbeRole::HttpGet: return http_probe(spec, per_hop_timeout_);
  }
  return std::nullopt;
}

bool RealProbeTransport::tcp_handshake(const std::string& destination, std::uint16_t port) {
  ProbeSpec spec;
  spec.role = ProbeRole::Syn;
  spec.protocol = TraceProtocol::Tcp;
  spec.destination = destination;
  spec.port = port;
  spec.ttl = 64;
  auto reply = tcp_probe(spec, per_hop_timeout_);
  return reply && reply->kind == HopKind::SynAck;
}

std::string probe_capability_error() {
  int fd = open_icmp_socket();
  if (fd >= 0) {
    ::close(fd);
    return "";
  }
  return "cannot open an ICMP socket (" + std::string(std::strerror(errno)) +
         "); real traceroutes need CAP_NET_RAW (run as root or "
         "`setcap cap_net_raw+ep` the binary) or an allowed "
         "net.ipv4.ping_group_range";
}

}  // namespace blockscope
