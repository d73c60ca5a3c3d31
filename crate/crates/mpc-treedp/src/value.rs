//! Saturating integer values with infinite sentinels.
//!
//! Maximisation problems use [`NEG_INF`] for "impossible", minimisation
//! problems use [`INF`]. Adding anything to a sentinel keeps the sentinel.

pub type Value = i64;

pub const NEG_INF: Value = i64::MIN;
pub const INF: Value = i64::MAX;

/// Max-plus addition: `-inf + x = -inf`.
#[inline]
pub fn madd(a: Value, b: Value) -> Value {
    if a == NEG_INF || b == NEG_INF {
        NEG_INF
    } else {
        a.saturating_add(b)
    }
}

/// Min-plus addition: `inf + x = inf`.
#[inline]
pub fn sadd(a: Value, b: Value) -> Value {
    if a == INF || b == INF {
        INF
    } else {
        a.saturating_add(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinels_absorb() {
        assert_eq!(madd(NEG_INF, 5), NEG_INF);
        assert_eq!(madd(3, 4), 7);
        assert_eq!(sadd(INF, -5), INF);
        assert_eq!(sadd(2, 2), 4);
    }
}
