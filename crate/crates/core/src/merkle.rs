//! Domain-separated binary Merkle trees with Bitcoin-style odd-node duplication.
//!
//! Leaves are hashed as `h(0x00 || value)` and interior nodes as
//! `h(0x01 || left || right)`. A level with an odd number of nodes pairs its
//! last node with a copy of itself.

use serde::{Deserialize, Serialize};

use crate::codec::{DecodeError, Reader};
use crate::hash::{sha256, Digest};
use crate::model::{ModelError, Transaction};

pub const LEAF_PREFIX: u8 = 0x00;
pub const NODE_PREFIX: u8 = 0x01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// One step of an inclusion path: the sibling digest and which side of the
/// running hash it sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub sibling: Digest,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf_index: u64,
    pub path: Vec<PathStep>,
}

impl MerkleProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + 33 * self.path.len());
        self.encode_into(&mut out);
        out
    }

    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.leaf_index.to_be_bytes());
        out.push(self.path.len() as u8);
        for step in &self.path {
            out.push(match step.side {
                Side::Left => 0,
                Side::Right => 1,
            });
            out.extend_from_slice(&step.sibling.0);
        }
    }

    pub(crate) fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let leaf_index = r.u64("merkle.leaf_index")?;
        let len = r.u8("merkle.path_len")? as usize;
        if len > 64 {
            return Err(DecodeError::invalid("merkle.path_len", format!("{len} > 64")));
        }
        let mut path = Vec::with_capacity(len);
        for _ in 0..len {
            let side = match r.u8("merkle.side")? {
                0 => Side::Left,
                1 => Side::Right,
                other => {
                    return Err(DecodeError::invalid("merkle.side", format!("tag {other}")));
                }
            };
            path.push(PathStep {
                sibling: Digest(r.array("merkle.sibling")?),
                side,
            });
        }
        Ok(MerkleProof { leaf_index, path })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let proof = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(proof)
    }
}

pub fn leaf_hash(value: &Digest) -> Digest {
    sha256(&[&[LEAF_PREFIX], &value.0])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    sha256(&[&[NODE_PREFIX], &left.0, &right.0])
}

fn next_level(level: &[Digest]) -> Vec<Digest> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => node_hash(l, r),
            [only] => node_hash(only, only),
            _ => unreachable!(),
        })
        .collect()
}

/// Root over raw leaf values (txids, or digests in a signing batch).
pub fn root_of(values: &[Digest]) -> Result<Digest, ModelError> {
    if values.is_empty() {
        return Err(ModelError::EmptyBlockBody);
    }
    let mut level: Vec<Digest> = values.iter().map(leaf_hash).collect();
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(level[0])
}

pub fn prove_value(values: &[Digest], index: usize) -> Result<MerkleProof, ModelError> {
    if index >= values.len() {
        return Err(ModelError::IndexOutOfRange {
            index,
            count: values.len(),
        });
    }
    let mut level: Vec<Digest> = values.iter().map(leaf_hash).collect();
    let mut pos = index;
    let mut path = Vec::new();
    while level.len() > 1 {
        let step = if pos % 2 == 1 {
            PathStep {
                sibling: level[pos - 1],
                side: Side::Left,
            }
        } else {
            PathStep {
                sibling: *level.get(pos + 1).unwrap_or(&level[pos]),
                side: Side::Right,
            }
        };
        path.push(step);
        level = next_level(&level);
        pos /= 2;
    }
    Ok(MerkleProof {
        leaf_index: index as u64,
        path,
    })
}

/// Folds `value` up `proof` and compares with `root`.
///
/// The side markers must agree with the bits of `leaf_index`, so a proof
/// cannot be relabelled to claim a different position.
pub fn verify_value(root: &Digest, value: &Digest, proof: &MerkleProof) -> bool {
    if proof.path.len() > 64 {
        return false;
    }
    if proof.path.len() < 64 && proof.leaf_index >> proof.path.len() != 0 {
        return false;
    }
    let mut acc = leaf_hash(value);
    for (depth, step) in proof.path.iter().enumerate() {
        let is_right_child = (proof.leaf_index >> depth) & 1 == 1;
        acc = match (step.side, is_right_child) {
            (Side::Left, true) => node_hash(&step.sibling, &acc),
            (Side::Right, false) => node_hash(&acc, &step.sibling),
            _ => return false,
        };
    }
    acc == *root
}

fn txids(txs: &[Transaction]) -> Vec<Digest> {
    txs.iter().map(Transaction::txid).collect()
}

/// Merkle root over a block body.
pub fn merkle_root(txs: &[Transaction]) -> Result<Digest, ModelError> {
    root_of(&txids(txs))
}

/// Inclusion proof for `txs[index]`.
pub fn merkle_prove(txs: &[Transaction], index: usize) -> Result<MerkleProof, ModelError> {
    prove_value(&txids(txs), index)
}

pub fn merkle_verify(root: &Digest, txid: &Digest, proof: &MerkleProof) -> bool {
    verify_value(root, txid, proof)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(i: u8) -> Transaction {
        Transaction::payment(vec![i])
    }

    #[test]
    fn empty_body_is_rejected() {
        assert_eq!(merkle_root(&[]), Err(ModelError::EmptyBlockBody));
    }

    #[test]
    fn single_leaf_root_is_leaf_hash() {
        let t = tx(1);
        assert_eq!(merkle_root(std::slice::from_ref(&t)).unwrap(), sha256(&[&[0], &t.txid().0]));
        let proof = merkle_prove(std::slice::from_ref(&t), 0).unwrap();
        assert!(proof.path.is_empty());
        assert!(merkle_verify(&leaf_hash(&t.txid()), &t.txid(), &proof));
    }

    #[test]
    fn two_identical_leaves() {
        let t = tx(9);
        let l = leaf_hash(&t.txid());
        assert_eq!(
            merkle_root(&[t.clone(), t]).unwrap(),
            sha256(&[&[1], &l.0, &l.0])
        );
    }

    #[test]
    fn out_of_range_index() {
        assert!(matches!(
            merkle_prove(&[tx(0)], 1),
            Err(ModelError::IndexOutOfRange { index: 1, count: 1 })
        ));
    }

    #[test]
    fn flipped_sibling_fails() {
        let txs: Vec<_> = (0..4).map(tx).collect();
        let root = merkle_root(&txs).unwrap();
        let mut proof = merkle_prove(&txs, 2).unwrap();
        assert_eq!(proof.path.len(), 2);
        assert!(merkle_verify(&root, &txs[2].txid(), &proof));
        proof.path[0].sibling.0[0] ^= 1;
        assert!(!merkle_verify(&root, &txs[2].txid(), &proof));
    }

    #[test]
    fn relabelled_index_fails() {
        let txs: Vec<_> = (0..4).map(tx).collect();
        let root = merkle_root(&txs).unwrap();
        let mut proof = merkle_prove(&txs, 1).unwrap();
        proof.leaf_index = 5;
        assert!(!merkle_verify(&root, &txs[1].txid(), &proof));
        proof.leaf_index = 0;
        assert!(!merkle_verify(&root, &txs[1].txid(), &proof));
    }

    #[test]
    fn proof_bytes_round_trip() {
        let txs: Vec<_> = (0..5).map(tx).collect();
        let proof = merkle_prove(&txs, 4).unwrap();
        assert_eq!(MerkleProof::from_bytes(&proof.to_bytes()).unwrap(), proof);
    }
}
