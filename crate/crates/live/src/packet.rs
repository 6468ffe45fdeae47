//! Binary frame packets: a 14-byte little-endian header followed by RGB8 rows.

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"WRSF";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum PacketMethod {
    Fov = 0,
    Wrs = 1,
    SideBySide = 2,
}

impl TryFrom<u8> for PacketMethod {
    type Error = PacketError;

    fn try_from(v: u8) -> Result<Self, PacketError> {
        match v {
            0 => Ok(Self::Fov),
            1 => Ok(Self::Wrs),
            2 => Ok(Self::SideBySide),
            other => Err(PacketError::Method(other)),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("packet shorter than its header")]
    Truncated,
    #[error("bad magic")]
    Magic,
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("unknown method byte {0}")]
    Method(u8),
    #[error("payload is {actual} bytes, header implies {expected}")]
    Payload { expected: usize, actual: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramePacket {
    pub method: PacketMethod,
    pub frame_index: u32,
    pub width: u16,
    pub height: u16,
    pub rgb: Vec<u8>,
}

impl FramePacket {
    pub fn new(
        method: PacketMethod,
        frame_index: u32,
        width: u16,
        height: u16,
        rgb: Vec<u8>,
    ) -> Result<Self, PacketError> {
        let expected = 3 * width as usize * height as usize;
        if rgb.len() != expected {
            return Err(PacketError::Payload {
                expected,
                actual: rgb.len(),
            });
        }
        Ok(Self {
            method,
            frame_index,
            width,
            height,
            rgb,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.rgb.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.method as u8);
        out.extend_from_slice(&self.frame_index.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PacketError> {
        if bytes.len() < HEADER_LEN {
            return Err(PacketError::Truncated);
        }
        if &bytes[..4] != MAGIC {
            return Err(PacketError::Magic);
        }
        if bytes[4] != VERSION {
            return Err(PacketError::Version(bytes[4]));
        }
        let method = PacketMethod::try_from(bytes[5])?;
        let frame_index = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let width = u16::from_le_bytes(bytes[10..12].try_into().unwrap());
        let height = u16::from_le_bytes(bytes[12..14].try_into().unwrap());
        Self::new(
            method,
            frame_index,
            width,
            height,
            bytes[HEADER_LEN..].to_vec(),
        )
    }

    /// RGB triple at `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width as usize + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }
}
