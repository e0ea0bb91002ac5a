use super::{ExprError, Func, Node};

// Recursive descent. Precedence from loosest to tightest:
//   expr  := term (('+' | '-') term)*
//   term  := unary (('*' | '/') unary)*
//   unary := ('-' | '+') unary | power
//   power := primary ('^' exponent)*
// Reported offsets are 1-based.

pub(super) fn parse(text: &str, dim: usize, allow_param: bool) -> Result<Node, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
        allow_param,
    };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("end of input or an operator"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
    allow_param: bool,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos + 1,
            expected: expected.to_string(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("'{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                // A signed literal not followed by '^' is a negative constant.
                let save = self.pos;
                if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                    let value = self.number()?;
                    if self.peek() != Some(b'^') {
                        return Ok(Node::Const(-value));
                    }
                    self.pos = save;
                }
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let mut base = self.primary()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.exponent()?;
            base = Node::Pow(Box::new(base), k);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let parenthesised = self.peek() == Some(b'(');
        if parenthesised {
            self.pos += 1;
        }
        let mut sign = 1i64;
        match self.peek() {
            Some(b'-') => {
                sign = -1;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("integer exponent"));
        }
        if matches!(self.src.get(self.pos), Some(b'.' | b'e' | b'E')) {
            return Err(self.syntax("integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("0");
        let magnitude: i64 = digits
            .parse()
            .map_err(|_| ExprError::Syntax {
                offset: start + 1,
                expected: "integer exponent".into(),
            })?;
        let k = sign * magnitude;
        if k.abs() > i32::MAX as i64 {
            return Err(ExprError::Syntax {
                offset: start + 1,
                expected: "integer exponent".into(),
            });
        }
        if parenthesised {
            self.expect(b')')?;
        }
        Ok(k as i32)
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if exp_start == self.pos {
                self.pos = mark;
                return Err(self.syntax("digits in number exponent"));
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map_err(|_| ExprError::Syntax {
            offset: start + 1,
            expected: "number".into(),
        })
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Node::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            _ => Err(self.syntax("number, variable, function call or '('")),
        }
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match name {
            "x" => {
                self.expect(b'(')?;
                self.skip_ws();
                let idx_start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if idx_start == self.pos {
                    return Err(self.syntax("variable index"));
                }
                let digits = std::str::from_utf8(&self.src[idx_start..self.pos]).unwrap_or("");
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                self.expect(b')')?;
                if index == 0 || index > self.dim {
                    return Err(ExprError::VariableIndexOutOfRange {
                        index,
                        dim: self.dim,
                        offset: idx_start + 1,
                    });
                }
                Ok(Node::Var(index - 1))
            }
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "t" if self.allow_param => Ok(Node::Param),
            _ => match Func::from_name(name) {
                Some(func) => {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    Ok(Node::Call(func, Box::new(arg)))
                }
                None => Err(ExprError::UnknownIdentifier {
                    name: name.to_string(),
                    offset: start + 1,
                }),
            },
        }
    }
}
