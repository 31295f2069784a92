use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::block::Block;
use crate::codec::to_canonical;
use crate::content::Cid;
use crate::crypto::{hash, Hash};
use crate::tx::SignedTransaction;

/// Most blocks a single `Blocks` response may carry.
pub const MAX_BLOCKS_PER_RESPONSE: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetMessage {
    TxGossip(SignedTransaction),
    BlockGossip(Block),
    GetBlocks { from_height: u64, to_height: u64 },
    Blocks(Vec<Block>),
    ContentRequest(Cid),
    ContentResponse {
        cid: Cid,
        found: bool,
        #[serde(with = "hex_bytes")]
        bytes: Vec<u8>,
    },
}

impl NetMessage {
    pub fn hash(&self) -> Hash {
        hash(&to_canonical(self).expect("messages are encodable"))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NetMessage::TxGossip(_) => "TxGossip",
            NetMessage::BlockGossip(_) => "BlockGossip",
            NetMessage::GetBlocks { .. } => "GetBlocks",
            NetMessage::Blocks(_) => "Blocks",
            NetMessage::ContentRequest(_) => "ContentRequest",
            NetMessage::ContentResponse { .. } => "ContentResponse",
        }
    }
}

mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        if s.bytes().any(|c| c.is_ascii_uppercase()) {
            return Err(serde::de::Error::custom("hex must be lowercase"));
        }
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::decode_canonical;

    #[test]
    fn content_response_is_hex() {
        let msg = NetMessage::ContentResponse { cid: Cid::of(b"hi"), found: true, bytes: b"hi".to_vec() };
        let text = String::from_utf8(to_canonical(&msg).unwrap()).unwrap();
        assert!(text.contains(r#""bytes":"6869""#), "{text}");
        let back: NetMessage = decode_canonical(text.as_bytes()).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn get_blocks_shape() {
        let msg = NetMessage::GetBlocks { from_height: 3, to_height: 9 };
        assert_eq!(to_canonical(&msg).unwrap(), br#"{"GetBlocks":{"from_height":3,"to_height":9}}"#);
    }
}
