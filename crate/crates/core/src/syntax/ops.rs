use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntOp {
    Add,
    Sub,
    Mul,
}

impl IntOp {
    pub fn symbol(self) -> &'static str {
        match self {
            IntOp::Add => "+",
            IntOp::Sub => "-",
            IntOp::Mul => "*",
        }
    }

    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            IntOp::Add => a.wrapping_add(b),
            IntOp::Sub => a.wrapping_sub(b),
            IntOp::Mul => a.wrapping_mul(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Ne,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Le => "<=",
            RelOp::Lt => "<",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
        }
    }

    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            RelOp::Le => a <= b,
            RelOp::Lt => a < b,
            RelOp::Ge => a >= b,
            RelOp::Gt => a > b,
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
        }
    }
}

/// Surface operators. Every application is saturated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Int(IntOp),
    Rel(RelOp),
    Par,
    Consume,
    Move,
    Linearly,
    WithLinearly,
    NewRef,
    FreeRef,
    NewLifetime,
    EndLifetime,
    Borrow,
    Share,
    Copy,
    JoinMut,
    Reclaim,
    ExecBO,
}

impl Op {
    pub const PREFIX: [Op; 15] = [
        Op::Par,
        Op::Consume,
        Op::Move,
        Op::Linearly,
        Op::WithLinearly,
        Op::NewRef,
        Op::FreeRef,
        Op::NewLifetime,
        Op::EndLifetime,
        Op::Borrow,
        Op::Share,
        Op::Copy,
        Op::JoinMut,
        Op::Reclaim,
        Op::ExecBO,
    ];

    pub fn arity(self) -> usize {
        match self {
            Op::Int(_) | Op::Rel(_) | Op::Par | Op::NewRef | Op::NewLifetime | Op::Borrow | Op::Reclaim | Op::ExecBO => 2,
            _ => 1,
        }
    }

    /// Prefix keyword; infix operators answer with their symbol.
    pub fn keyword(self) -> &'static str {
        match self {
            Op::Int(o) => o.symbol(),
            Op::Rel(o) => o.symbol(),
            Op::Par => "par",
            Op::Consume => "consume",
            Op::Move => "move",
            Op::Linearly => "linearly",
            Op::WithLinearly => "withLinearly",
            Op::NewRef => "newRef",
            Op::FreeRef => "freeRef",
            Op::NewLifetime => "newLifetime",
            Op::EndLifetime => "endLifetime",
            Op::Borrow => "borrow",
            Op::Share => "share",
            Op::Copy => "copy",
            Op::JoinMut => "joinMut",
            Op::Reclaim => "reclaim",
            Op::ExecBO => "execBO",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Op> {
        Op::PREFIX.iter().copied().find(|o| o.keyword() == s)
    }

    pub fn is_infix(self) -> bool {
        matches!(self, Op::Int(_) | Op::Rel(_))
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Constructors of the borrow monad.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MonadOp {
    Pure,
    Bind,
    SexecBO,
    ParBO,
    Deref,
    UpdateRef,
}

impl MonadOp {
    pub const ALL: [MonadOp; 6] =
        [MonadOp::Pure, MonadOp::Bind, MonadOp::SexecBO, MonadOp::ParBO, MonadOp::Deref, MonadOp::UpdateRef];

    pub fn arity(self) -> usize {
        match self {
            MonadOp::Pure | MonadOp::Deref => 1,
            _ => 2,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            MonadOp::Pure => "pure",
            MonadOp::Bind => "bind",
            MonadOp::SexecBO => "sexecBO",
            MonadOp::ParBO => "parBO",
            MonadOp::Deref => "deref",
            MonadOp::UpdateRef => "updateRef",
        }
    }

    pub fn from_keyword(s: &str) -> Option<MonadOp> {
        MonadOp::ALL.iter().copied().find(|o| o.keyword() == s)
    }
}

impl fmt::Display for MonadOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}
