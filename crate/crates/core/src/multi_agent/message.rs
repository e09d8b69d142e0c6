use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};

use crate::error::{Error, Result};
use crate::fourier::CoefficientVector;

/// Size of the fixed message header in bytes.
pub const HEADER_LEN: usize = 32;

/// One agent's coefficients for one step, as exchanged through the hub.
///
/// Wire layout, little-endian: `agent_id: u32, step_index: u64,
/// t0erg: f64, t_end: f64, count: u32`, then `count` f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMessage {
    pub agent_id: u32,
    pub step_index: u64,
    pub t0erg: f64,
    pub t_end: f64,
    pub coefficients: CoefficientVector,
}

impl CoefficientMessage {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 8 * self.coefficients.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.agent_id.to_le_bytes());
        out.extend_from_slice(&self.step_index.to_le_bytes());
        out.extend_from_slice(&self.t0erg.to_le_bytes());
        out.extend_from_slice(&self.t_end.to_le_bytes());
        out.extend_from_slice(&(self.coefficients.len() as u32).to_le_bytes());
        for v in self.coefficients.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Wire(format!("message of {} bytes has no full header", bytes.len())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_bits(u64_at(o));
        let count = u32_at(28) as usize;
        let want = HEADER_LEN + 8 * count;
        if bytes.len() != want {
            return Err(Error::Wire(format!("header announces {want} bytes, got {}", bytes.len())));
        }
        let values = (0..count).map(|i| f64_at(HEADER_LEN + 8 * i)).collect::<Vec<_>>();
        Ok(Self {
            agent_id: u32_at(0),
            step_index: u64_at(4),
            t0erg: f64_at(12),
            t_end: f64_at(20),
            coefficients: values.into(),
        })
    }
}

/// Datagram transport carrying the same bytes as the in-process hub.
pub struct UdpTransport {
    socket: UdpSocket,
    buf: Vec<u8>,
}

impl UdpTransport {
    /// Binds a socket; `max_coeffs` sizes the receive buffer.
    pub fn bind(addr: impl ToSocketAddrs, max_coeffs: usize) -> Result<Self> {
        Ok(Self {
            socket: UdpSocket::bind(addr)?,
            buf: vec![0; HEADER_LEN + 8 * max_coeffs],
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    pub fn set_read_timeout(&self, timeout: Option<std::time::Duration>) -> Result<()> {
        Ok(self.socket.set_read_timeout(timeout)?)
    }

    /// Sends one message; returns the number of bytes put on the wire.
    pub fn send_to(&self, msg: &CoefficientMessage, to: SocketAddr) -> Result<usize> {
        let bytes = msg.to_bytes();
        let sent = self.socket.send_to(&bytes, to)?;
        if sent != bytes.len() {
            return Err(Error::Wire(format!("short send: {sent} of {} bytes", bytes.len())));
        }
        Ok(sent)
    }

    /// Blocks until a message arrives (or the read timeout passes).
    pub fn recv(&mut self) -> Result<(CoefficientMessage, SocketAddr)> {
        let (n, from) = self.socket.recv_from(&mut self.buf)?;
        Ok((CoefficientMessage::from_bytes(&self.buf[..n])?, from))
    }
}
